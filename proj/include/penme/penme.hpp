// Copyright 2026 The PENME Authors.
//
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

#include "penme/analysis.hpp"
#include "penme/binary_io.hpp"
#include "penme/codebook.hpp"
#include "penme/domain.hpp"
#include "penme/embeddings.hpp"
#include "penme/error.hpp"
#include "penme/eval.hpp"
#include "penme/pairs.hpp"
#include "penme/pipeline.hpp"
#include "penme/projector.hpp"
#include "penme/rouge.hpp"
#include "penme/synthetic.hpp"
