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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trimodal/dataset.hpp"
#include "trimodal/encoder.hpp"
#include "trimodal/objective.hpp"
#include "trimodal/random.hpp"
#include "trimodal/tokenizer.hpp"

namespace testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "trimodal-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> word_list(std::size_t n) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
  return words;
}

inline std::string random_text(trimodal::Rng& rng, const std::vector<std::string>& words,
                               std::size_t min_len, std::size_t max_len) {
  const std::size_t n = min_len + rng.below(max_len - min_len + 1);
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += words[rng.below(words.size())];
  }
  return text;
}

struct TinyCorpus {
  trimodal::Vocab vocab;
  std::vector<trimodal::TripletExample> examples;
  std::vector<trimodal::TokenizedTriplet> triplets;
};

inline TinyCorpus tiny_corpus(std::size_t count, std::uint64_t seed, std::size_t words = 20) {
  trimodal::Rng rng(seed);
  const auto lexicon = word_list(words);
  TinyCorpus c;
  std::vector<std::string> all;
  for (std::size_t i = 0; i < count; ++i) {
    trimodal::TripletExample t;
    t.query = random_text(rng, lexicon, 2, 4);
    t.positive = random_text(rng, lexicon, 2, 5);
    for (auto& n : t.negatives) n = random_text(rng, lexicon, 1, 5);
    c.examples.push_back(t);
  }
  c.vocab = trimodal::Vocab::build(lexicon);
  c.triplets = trimodal::tokenize_triplets(c.examples, c.vocab);
  return c;
}

inline trimodal::EncoderConfig tiny_config(int vocab_size, std::uint64_t seed = 5) {
  return trimodal::EncoderConfig{.dim = 8, .layers = 1, .heads = 2, .max_seq_len = 16,
                                 .vocab_size = vocab_size, .seed = seed};
}

// Straight-line reference formulas: plain loops, no max-subtraction, no shared code.
namespace ref {

inline std::vector<double> softmax(const std::vector<double>& s, double tau) {
  double z = 0.0;
  for (double v : s) z += std::exp(v / tau);
  std::vector<double> p;
  for (double v : s) p.push_back(std::exp(v / tau) / z);
  return p;
}

inline double info_nce(const std::vector<double>& s, double tau, double eps) {
  const auto p = softmax(s, tau);
  const double n = static_cast<double>(s.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double target = (i == 0 ? 1.0 - eps : 0.0) + eps / n;
    loss -= target * std::log(p[i]);
  }
  return loss;
}

inline double primary(double d, double s, double c, double e, double l1, double l2, double l3) {
  return (l1 * d + l2 * s + l3 * c + e) / 4.0;
}

inline double cross_entropy(const std::vector<double>& target, const std::vector<double>& p) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) h -= target[i] * std::log(p[i]);
  return h;
}

inline double entropy(const std::vector<double>& p) { return cross_entropy(p, p); }

inline double self_distill(const std::vector<double>& ens, const std::vector<double>& pd,
                           const std::vector<double>& ps, const std::vector<double>& pc,
                           double l1, double l2, double l3) {
  return (l1 * cross_entropy(ens, pd) + l2 * cross_entropy(ens, ps) +
          l3 * cross_entropy(ens, pc)) /
         3.0;
}

inline double cosine_loss(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double mse_loss(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double similarity_loss(const std::vector<std::vector<double>>& es,
                              const std::vector<std::vector<double>>& et) {
  const std::size_t b = es.size();
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double ss = 0.0, tt = 0.0;
      for (std::size_t k = 0; k < es[i].size(); ++k) {
        ss += es[i][k] * es[j][k];
        tt += et[i][k] * et[j][k];
      }
      total += (ss - tt) * (ss - tt);
    }
  }
  return total / static_cast<double>(b * b);
}

}  // namespace ref
}  // namespace testing
