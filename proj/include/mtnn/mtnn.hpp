#pragma once

#include "mtnn/errors.hpp"
#include "mtnn/matrix.hpp"
#include "mtnn/kernels.hpp"
#include "mtnn/platform.hpp"
#include "mtnn/bench.hpp"
#include "mtnn/csv.hpp"
#include "mtnn/gbdt.hpp"
#include "mtnn/cross_validation.hpp"
#include "mtnn/model_io.hpp"
#include "mtnn/selector.hpp"
#include "mtnn/metrics.hpp"
#include "mtnn/evaluation.hpp"
#include "mtnn/fcn.hpp"
