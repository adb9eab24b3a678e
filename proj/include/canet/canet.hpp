#pragma once

// Umbrella header for the whole library.

#include "canet/attention.hpp"
#include "canet/augment.hpp"
#include "canet/bench.hpp"
#include "canet/checkpoint.hpp"
#include "canet/config.hpp"
#include "canet/conv.hpp"
#include "canet/folds.hpp"
#include "canet/infer.hpp"
#include "canet/loss.hpp"
#include "canet/metrics.hpp"
#include "canet/network.hpp"
#include "canet/norm.hpp"
#include "canet/numeric.hpp"
#include "canet/phantom.hpp"
#include "canet/postproc.hpp"
#include "canet/prep.hpp"
#include "canet/report.hpp"
#include "canet/rng.hpp"
#include "canet/tensor.hpp"
#include "canet/train.hpp"
#include "canet/vvol.hpp"
