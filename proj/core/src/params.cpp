#include "lidcd/params.hpp"

#include <stdexcept>

namespace lidcd {

int ParamStore::add(std::string name, int rows, int cols, std::vector<double> init) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("ParamStore::add: non-positive dimensions");
  if (init.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("ParamStore::add: init size mismatch for " + name);
  Param p;
  p.name = std::move(name);
  p.rows = rows;
  p.cols = cols;
  p.value = std::move(init);
  entries_.push_back(std::move(p));
  return static_cast<int>(entries_.size()) - 1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Param& p : entries_) n += p.value.size();
  return n;
}

EvalCtx::EvalCtx(ad::Tape& tape, const ParamStore& store, bool training,
                 std::uint64_t seed, std::uint64_t step_key)
    : tape_(&tape), training_(training), seed_(seed), step_key_(step_key) {
  leaves_.reserve(store.size());
  for (const Param& p : store.entries())
    leaves_.push_back(tape.leaf(p.rows, p.cols, p.value));
}

RngStream& EvalCtx::dropout_stream(int module_id) {
  auto it = dropout_.find(module_id);
  if (it == dropout_.end()) {
    const std::uint64_t sid = combine_keys(step_key_, 0xd0u + static_cast<std::uint64_t>(module_id));
    it = dropout_.emplace(module_id, RngStream(seed_, sid)).first;
  }
  return it->second;
}

}  // namespace lidcd
