// Copyright 2026 The Flakesift Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include "flakesift/config.hpp"
#include "flakesift/core.hpp"
#include "flakesift/corpus_stats.hpp"
#include "flakesift/datasets.hpp"
#include "flakesift/error.hpp"
#include "flakesift/experiment.hpp"
#include "flakesift/features.hpp"
#include "flakesift/flake_history.hpp"
#include "flakesift/forest.hpp"
#include "flakesift/grid_search.hpp"
#include "flakesift/metrics.hpp"
#include "flakesift/model.hpp"
#include "flakesift/random.hpp"
#include "flakesift/rational.hpp"
#include "flakesift/records_io.hpp"
#include "flakesift/store.hpp"
#include "flakesift/synth.hpp"
