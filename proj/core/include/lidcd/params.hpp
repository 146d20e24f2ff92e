#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lidcd/adam.hpp"
#include "lidcd/rng.hpp"
#include "lidcd/tensor.hpp"

namespace lidcd {

// One trainable parameter tensor plus its optimizer state.
struct Param {
  std::string name;
  int rows = 1, cols = 1;
  std::vector<double> value;
  ad::AdamState adam;
};

// Flat, ordered registry of every trainable parameter of a model. Order is
// creation order, which keeps staging and optimizer sweeps deterministic.
class ParamStore {
 public:
  int add(std::string name, int rows, int cols, std::vector<double> init);

  Param& at(int handle) { return entries_[static_cast<std::size_t>(handle)]; }
  const Param& at(int handle) const { return entries_[static_cast<std::size_t>(handle)]; }
  std::size_t size() const { return entries_.size(); }
  std::vector<Param>& entries() { return entries_; }
  const std::vector<Param>& entries() const { return entries_; }

  std::size_t scalar_count() const;

 private:
  std::vector<Param> entries_;
};

// Per-evaluation view: a fresh tape with every parameter staged as a leaf,
// plus the bookkeeping modules need while building the loss graph (training
// mode, per-module dropout streams).
class EvalCtx {
 public:
  EvalCtx(ad::Tape& tape, const ParamStore& store, bool training,
          std::uint64_t seed, std::uint64_t step_key);

  ad::Tape& tape() { return *tape_; }
  bool training() const { return training_; }

  // Staged leaf for a parameter handle.
  const ad::Tensor& param(int handle) const {
    return leaves_[static_cast<std::size_t>(handle)];
  }
  const std::vector<ad::Tensor>& leaves() const { return leaves_; }

  // Dropout stream for a module; independent of any other module's draws so
  // skipping one module does not shift the masks of another.
  RngStream& dropout_stream(int module_id);

 private:
  ad::Tape* tape_;
  bool training_;
  std::uint64_t seed_, step_key_;
  std::vector<ad::Tensor> leaves_;
  std::map<int, RngStream> dropout_;
};

}  // namespace lidcd
