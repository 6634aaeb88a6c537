// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cascadec/batching/batched_llm.hpp"
#include "cascadec/cache/cache_store.hpp"
#include "cascadec/codegen/ensemble.hpp"
#include "cascadec/codegen/evolution.hpp"
#include "cascadec/modules/confidence.hpp"
#include "cascadec/modules/tool_loop.hpp"
#include "cascadec/optimizer/optimizer.hpp"
#include "cascadec/providers/simulated.hpp"
#include "cascadec/runtime/dataset_io.hpp"
#include "cascadec/runtime/plan_file.hpp"
#include "cascadec/task/config.hpp"
