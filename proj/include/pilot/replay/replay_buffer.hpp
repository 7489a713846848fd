#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pilot/binary_io.hpp"
#include "pilot/envs/goal_space.hpp"
#include "pilot/numerics/random.hpp"

namespace pilot {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> next_state;
  std::vector<double> achieved_goal;  // phi(next_state)
  std::vector<double> desired_goal;
  std::vector<double> state_goal;     // phi(state); landmark queries need it
  double reward = 0.0;
  bool done = false;
  std::int64_t trajectory_id = 0;
  std::int64_t step_index = 0;

  bool operator==(const Transition&) const = default;
};

enum class RelabelStrategy { kNone, kFuture };

// Recomputes the reward of a relabelled transition. Defaults to the sparse
// indicator; the landmark-bonus stage installs its own.
using RewardFn = std::function<double(const Transition&)>;
// Batched variant: rewrites the reward of every relabelled transition at once.
using BatchRewardFn = std::function<void(std::span<Transition* const>)>;

struct RelabelSpec {
  RelabelStrategy strategy = RelabelStrategy::kFuture;
  double future_fraction = 0.8;
  RewardFn reward_fn;
  BatchRewardFn batch_reward_fn;

  static RelabelSpec none() { return {RelabelStrategy::kNone, 0.0, {}, {}}; }
};

// Fixed-capacity transition store with whole-trajectory FIFO eviction.
class ReplayBuffer {
 public:
  static constexpr std::string_view kMagic = "PILOTBUF1";

  ReplayBuffer(std::size_t capacity, GoalSpaceSpec goal_space)
      : capacity_(capacity), goal_space_(std::move(goal_space)) {
    if (capacity_ == 0) throw InputError("ReplayBuffer: capacity must be positive");
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }
  const GoalSpaceSpec& goal_space() const { return goal_space_; }
  std::size_t num_trajectories() const { return index_.size(); }

  const Transition& at(std::size_t i) const { return storage_.at(i); }

  bool contains_trajectory(std::int64_t id) const { return index_.count(id) > 0; }

  // [first, first + length) in buffer positions.
  std::pair<std::size_t, std::size_t> trajectory_range(std::int64_t id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw StateError("trajectory " + std::to_string(id) + " not stored");
    return {static_cast<std::size_t>(it->second.first_seq - front_seq_), it->second.length};
  }

  std::vector<std::int64_t> trajectory_ids() const {
    std::vector<std::int64_t> ids;
    for (const auto& [id, _] : index_) ids.push_back(id);
    return ids;
  }

  void push(const std::vector<Transition>& trajectory) {
    if (trajectory.empty()) throw InputError("push: empty trajectory");
    if (trajectory.size() > capacity_) {
      throw InputError("push: trajectory of " + std::to_string(trajectory.size()) +
                       " steps exceeds capacity " + std::to_string(capacity_));
    }
    const std::int64_t id = trajectory.front().trajectory_id;
    if (index_.count(id)) throw InputError("push: trajectory " + std::to_string(id) + " already stored");
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
      const Transition& t = trajectory[i];
      if (t.trajectory_id != id) throw InputError("push: mixed trajectory ids");
      if (t.step_index != trajectory.front().step_index + static_cast<std::int64_t>(i)) {
        throw InputError("push: non-contiguous step indices in trajectory " + std::to_string(id));
      }
    }
    index_[id] = {front_seq_ + storage_.size(), trajectory.size()};
    order_.push_back(id);
    storage_.insert(storage_.end(), trajectory.begin(), trajectory.end());
    while (storage_.size() > capacity_) evict_oldest();
  }

  // Uniform sampling with replacement; each draw is relabelled independently
  // with probability future_fraction to the achieved goal of a uniformly
  // chosen step at or after it in the same trajectory.
  std::vector<Transition> sample_batch(std::size_t batch_size, const RelabelSpec& relabel,
                                       Rng& rng) const {
    if (storage_.empty()) throw StateError("sample_batch: buffer is empty");
    if (relabel.future_fraction < 0.0 || relabel.future_fraction > 1.0) {
      throw InputError("sample_batch: future_fraction outside [0, 1]");
    }
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    std::vector<std::size_t> relabelled;
    for (std::size_t b = 0; b < batch_size; ++b) {
      const std::size_t i = pick(rng);
      Transition t = storage_[i];
      if (relabel.strategy == RelabelStrategy::kFuture && coin(rng) < relabel.future_fraction) {
        const auto& entry = index_.at(t.trajectory_id);
        const std::size_t last = static_cast<std::size_t>(entry.first_seq - front_seq_) + entry.length - 1;
        const std::size_t future = std::uniform_int_distribution<std::size_t>(i, last)(rng);
        t.desired_goal = storage_[future].achieved_goal;
        if (relabel.batch_reward_fn) {
          relabelled.push_back(b);
        } else {
          t.reward = relabel.reward_fn ? relabel.reward_fn(t)
                                       : sparse_reward(t.achieved_goal, t.desired_goal, goal_space_);
        }
      }
      batch.push_back(std::move(t));
    }
    if (!relabelled.empty()) {
      std::vector<Transition*> ptrs;
      ptrs.reserve(relabelled.size());
      for (std::size_t b : relabelled) ptrs.push_back(&batch[b]);
      relabel.batch_reward_fn(ptrs);
    }
    return batch;
  }

  // Flat binary snapshot:
  //   "PILOTBUF1", u32 count, u32 state_dim, u32 action_dim, u32 goal_dim,
  //   u32 capacity, then f64: success_threshold followed by `count` records of
  //   state, action, next_state, achieved_goal, desired_goal, state_goal,
  //   reward, done, trajectory_id, step_index (all little-endian).
  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write buffer snapshot " + path);
    const Dims d = dims();
    binary::write_magic(os, kMagic);
    binary::write_u32(os, static_cast<std::uint32_t>(storage_.size()));
    binary::write_u32(os, static_cast<std::uint32_t>(d.state));
    binary::write_u32(os, static_cast<std::uint32_t>(d.action));
    binary::write_u32(os, static_cast<std::uint32_t>(goal_space_.goal_dim));
    binary::write_u32(os, static_cast<std::uint32_t>(capacity_));
    binary::write_f64(os, goal_space_.success_threshold);
    for (const Transition& t : storage_) {
      binary::write_f64s(os, t.state);
      binary::write_f64s(os, t.action);
      binary::write_f64s(os, t.next_state);
      binary::write_f64s(os, t.achieved_goal);
      binary::write_f64s(os, t.desired_goal);
      binary::write_f64s(os, t.state_goal);
      binary::write_f64(os, t.reward);
      binary::write_f64(os, t.done ? 1.0 : 0.0);
      binary::write_f64(os, static_cast<double>(t.trajectory_id));
      binary::write_f64(os, static_cast<double>(t.step_index));
    }
    if (!os) throw Error("failed writing buffer snapshot " + path);
  }

  static ReplayBuffer load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open buffer snapshot " + path);
    binary::expect_magic(is, kMagic);
    const std::size_t count = binary::read_u32(is);
    const std::size_t sd = binary::read_u32(is);
    const std::size_t ad = binary::read_u32(is);
    const std::size_t gd = binary::read_u32(is);
    const std::size_t cap = binary::read_u32(is);
    GoalSpaceSpec spec{gd, binary::read_f64(is), "position"};
    ReplayBuffer buf(cap, spec);
    std::vector<Transition> traj;
    for (std::size_t k = 0; k < count; ++k) {
      Transition t;
      t.state = binary::read_f64s(is, sd);
      t.action = binary::read_f64s(is, ad);
      t.next_state = binary::read_f64s(is, sd);
      t.achieved_goal = binary::read_f64s(is, gd);
      t.desired_goal = binary::read_f64s(is, gd);
      t.state_goal = binary::read_f64s(is, gd);
      t.reward = binary::read_f64(is);
      t.done = binary::read_f64(is) != 0.0;
      t.trajectory_id = static_cast<std::int64_t>(binary::read_f64(is));
      t.step_index = static_cast<std::int64_t>(binary::read_f64(is));
      if (!traj.empty() && traj.back().trajectory_id != t.trajectory_id) {
        buf.push(traj);
        traj.clear();
      }
      traj.push_back(std::move(t));
    }
    if (!traj.empty()) buf.push(traj);
    return buf;
  }

 private:
  struct Entry {
    std::uint64_t first_seq;
    std::size_t length;
  };
  struct Dims {
    std::size_t state = 0, action = 0;
  };

  Dims dims() const {
    if (storage_.empty()) return {};
    return {storage_.front().state.size(), storage_.front().action.size()};
  }

  void evict_oldest() {
    const std::int64_t id = order_.front();
    order_.pop_front();
    const std::size_t n = index_.at(id).length;
    storage_.erase(storage_.begin(), storage_.begin() + static_cast<std::ptrdiff_t>(n));
    front_seq_ += n;
    index_.erase(id);
  }

  std::size_t capacity_;
  GoalSpaceSpec goal_space_;
  std::deque<Transition> storage_;
  std::deque<std::int64_t> order_;
  std::map<std::int64_t, Entry> index_;
  std::uint64_t front_seq_ = 0;
};

}  // namespace pilot
