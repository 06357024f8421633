// Copyright 2026 The haren Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "haren/adam.hpp"
#include "haren/analysis.hpp"
#include "haren/autodiff.hpp"
#include "haren/binio.hpp"
#include "haren/config.hpp"
#include "haren/ctc.hpp"
#include "haren/dataio.hpp"
#include "haren/errors.hpp"
#include "haren/gradcheck.hpp"
#include "haren/metrics.hpp"
#include "haren/model.hpp"
#include "haren/objective.hpp"
#include "haren/pipeline.hpp"
#include "haren/report.hpp"
#include "haren/synthetic.hpp"
#include "haren/tensor.hpp"
#include "haren/tokens.hpp"
