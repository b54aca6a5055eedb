#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sadm/rng.hpp"
#include "sadm/tensor.hpp"

namespace sadm {

struct ParamEntry {
    Tensor value;
    Tensor grad;
    Tensor m, v;  // first/second moment accumulators
};

struct CheckpointError : std::runtime_error {
    enum class Kind { io, bad_magic, bad_version, truncated, bad_crc, unknown_tensor, shape_mismatch };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Named, shaped learnable arrays with gradient slots and optimizer state.
// Iteration order is creation order, which fixes the checkpoint layout and
// the update order (both matter for bit-level reproducibility).
class ParameterStore {
public:
    Tensor& create(const std::string& name, Shape shape);
    Tensor& create_normal(const std::string& name, Shape shape, double stddev, Rng& rng);

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    ParamEntry& entry(const std::string& name);
    const ParamEntry& entry(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }

    void zero_grad();
    // Plain gradient descent; kept alongside Adam for oracle tests.
    void sgd_step(double lr);
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    std::uint64_t step() const { return step_; }
    void set_step(std::uint64_t s) { step_ = s; }

    // Clears the Adam moments and the step counter (not values or grads);
    // used when switching training objectives so stale curvature estimates
    // from the previous phase cannot distort the new one.
    void reset_optimizer();

    void save(const std::string& path) const;
    // Loads into this store. With strict=true every tensor in the file must
    // already exist here with a matching shape (the normal resume path).
    void load(const std::string& path, bool strict = true);

private:
    std::vector<std::string> order_;
    std::map<std::string, ParamEntry> entries_;
    std::uint64_t step_ = 0;
};

}  // namespace sadm
