// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lcpred/common.hpp"
#include "lcpred/curve.hpp"
#include "lcpred/regression/cv_search.hpp"
#include "lcpred/regression/kernel.hpp"
#include "lcpred/regression/kernel_ols.hpp"
#include "lcpred/regression/metrics.hpp"
#include "lcpred/regression/nu_svr.hpp"
#include "lcpred/regression/random_forest.hpp"
#include "lcpred/regression/regressor.hpp"
#include "lcpred/regression/scaler.hpp"
#include "lcpred/scheduler/hyperband.hpp"
#include "lcpred/scheduler/oracles.hpp"
#include "lcpred/search_sim.hpp"
#include "lcpred/srm.hpp"
#include "lcpred/stopping.hpp"
#include "lcpred/synth.hpp"
#include "lcpred/io/advisor.hpp"
#include "lcpred/io/dataset_io.hpp"
#include "lcpred/io/files.hpp"
#include "lcpred/io/model_io.hpp"
#include "lcpred/io/report.hpp"
#include "lcpred/io/subprocess_oracle.hpp"
