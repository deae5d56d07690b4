#pragma once

#include "bootdelta/bootstrap.hpp"
#include "bootdelta/datagen.hpp"
#include "bootdelta/error.hpp"
#include "bootdelta/functionals.hpp"
#include "bootdelta/harness.hpp"
#include "bootdelta/limits.hpp"
#include "bootdelta/metrics.hpp"
#include "bootdelta/model_cdf.hpp"
#include "bootdelta/parallel.hpp"
#include "bootdelta/quadrature.hpp"
#include "bootdelta/rng.hpp"
#include "bootdelta/stats.hpp"
#include "bootdelta/stepfn.hpp"
