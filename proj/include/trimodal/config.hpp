// Copyright 2026-present the trimodal authors
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

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "trimodal/encoder.hpp"
#include "trimodal/hnsw.hpp"
#include "trimodal/losses.hpp"
#include "trimodal/rag.hpp"
#include "trimodal/scoring.hpp"
#include "trimodal/synthetic.hpp"
#include "trimodal/trainer.hpp"

namespace trimodal {

struct EvalSettings {
  Modality modality = Modality::kEnsemble;
  bool dump_scores = false;
  bool export_misranked = false;
  /// Stratified k-fold breakdown; 0 disables.
  std::size_t folds = 0;
  std::uint64_t fold_seed = 0;
};

struct GradCheckSettings {
  int dim = 8;
  int layers = 1;
  int heads = 2;
  std::size_t triplets = 2;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

struct RagSettings {
  RagParams params;
  /// Score with a freshly initialized encoder instead of a checkpoint.
  bool untrained = false;
};

/// Input and output locations. Relative paths resolve against `data`
/// (inputs) or the output directory (outputs); empty `data` means the output
/// directory.
struct PathSettings {
  std::filesystem::path data;
  std::filesystem::path train = corpus_files::kTrain;
  std::filesystem::path valid = corpus_files::kValid;
  std::filesystem::path test = corpus_files::kTest;
  std::filesystem::path vocab = corpus_files::kVocab;
  std::filesystem::path definitions = corpus_files::kDefinitions;
  std::filesystem::path kg = corpus_files::kKg;
  std::filesystem::path definitions_heldout = corpus_files::kDefinitionsHeldout;
  std::filesystem::path kg_heldout = corpus_files::kKgHeldout;
  std::filesystem::path notes = corpus_files::kNotes;
  std::filesystem::path queries = corpus_files::kQueries;
  /// Encoder read by eval, index-build, index-query and rag-eval.
  std::filesystem::path checkpoint = "model.ckpt";
  /// Encoder written by train.
  std::filesystem::path model = "model.ckpt";
  std::filesystem::path teacher = "model.ckpt";
  /// Optional JSONL of {"embedding": [...]} rows replacing the teacher model.
  std::filesystem::path teacher_embeddings;
  std::filesystem::path student = "student.ckpt";
  std::filesystem::path index = "index.bin";
};

/// Every tunable of the command-line pipeline. The JSON form is an object
/// of sections whose keys are the field names of the matching structs:
/// synthetic, encoder, train, distill, loss, weights, index, rag, eval,
/// grad_check, paths.
struct PipelineConfig {
  SyntheticSpec synthetic;
  EncoderConfig encoder;
  TrainConfig train;
  TrainConfig distill;
  std::uint64_t student_seed = 1;
  LossConfig loss;
  EnsembleWeights weights;
  IndexParams index;
  RagSettings rag;
  EvalSettings eval;
  GradCheckSettings grad_check;
  PathSettings paths;

  /// Applies a JSON object on top of the current values. Throws UsageError
  /// on unknown sections or keys and on values of the wrong type.
  void apply(const nlohmann::json& j);
  /// Sets every seed (corpus, encoder, training, index).
  void set_seed(std::uint64_t seed);
  nlohmann::ordered_json to_json() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace trimodal
