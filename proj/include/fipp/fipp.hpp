// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "fipp/align.hpp"
#include "fipp/common.hpp"
#include "fipp/eigen_solver.hpp"
#include "fipp/embio.hpp"
#include "fipp/objective.hpp"
#include "fipp/pipeline.hpp"
#include "fipp/preprocess.hpp"
#include "fipp/retrieval.hpp"
#include "fipp/selflearn.hpp"
#include "fipp/synthetic.hpp"
