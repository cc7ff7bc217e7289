#pragma once

#include "ssr/error.hpp"
#include "ssr/model_graph.hpp"
#include "ssr/hw_profile.hpp"
#include "ssr/perf_model.hpp"
#include "ssr/scheduler.hpp"
#include "ssr/acc_dse.hpp"
#include "ssr/dse.hpp"
#include "ssr/simulator.hpp"
#include "ssr/design_io.hpp"
#include "ssr/cli.hpp"
