#pragma once

#include "svshrink/common.hpp"
#include "svshrink/zonal.hpp"
#include "svshrink/matnorm.hpp"
#include "svshrink/priors.hpp"
#include "svshrink/estimators.hpp"
#include "svshrink/predictive.hpp"
#include "svshrink/regression.hpp"
#include "svshrink/riskbench.hpp"
