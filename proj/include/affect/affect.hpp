#pragma once

#include "affect/error.hpp"
#include "affect/types.hpp"
#include "affect/face_model.hpp"
#include "affect/dataio.hpp"
#include "affect/preprocess.hpp"
#include "affect/quaternion.hpp"
#include "affect/origami.hpp"
#include "affect/features.hpp"
#include "affect/dimred.hpp"
#include "affect/classify.hpp"
#include "affect/eval.hpp"
#include "affect/pipeline.hpp"
