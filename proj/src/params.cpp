#include "sadm/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "sadm/crc32.hpp"

namespace sadm {

Tensor& ParameterStore::create(const std::string& name, Shape shape) {
    if (has(name)) throw std::invalid_argument("parameter already exists: " + name);
    ParamEntry e;
    e.value = Tensor::zeros(shape);
    e.grad = Tensor::zeros(shape);
    e.m = Tensor::zeros(shape);
    e.v = Tensor::zeros(std::move(shape));
    order_.push_back(name);
    return entries_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParameterStore::create_normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
    Tensor& t = create(name, std::move(shape));
    for (auto& x : t.data) x = stddev * rng.normal();
    return t;
}

ParamEntry& ParameterStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("no such parameter: " + name);
    return it->second;
}

const ParamEntry& ParameterStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("no such parameter: " + name);
    return it->second;
}

void ParameterStore::zero_grad() {
    for (auto& name : order_) {
        auto& g = entries_[name].grad;
        std::fill(g.data.begin(), g.data.end(), 0.0);
    }
}

void ParameterStore::reset_optimizer() {
    for (auto& name : order_) {
        auto& e = entries_[name];
        std::fill(e.m.data.begin(), e.m.data.end(), 0.0);
        std::fill(e.v.data.begin(), e.v.data.end(), 0.0);
    }
    step_ = 0;
}

void ParameterStore::sgd_step(double lr) {
    for (auto& name : order_) {
        auto& e = entries_[name];
        for (std::int64_t i = 0; i < e.value.size(); ++i) e.value[i] -= lr * e.grad[i];
        std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
    }
    ++step_;
}

void ParameterStore::adam_step(double lr, double beta1, double beta2, double eps) {
    const double t = static_cast<double>(step_ + 1);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (auto& name : order_) {
        auto& e = entries_[name];
        for (std::int64_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g;
            e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g * g;
            const double mhat = e.m[i] / bc1;
            const double vhat = e.v[i] / bc2;
            e.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
    }
    ++step_;
}

namespace {

constexpr char kMagic[8] = {'S', 'A', 'D', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_record(std::string& out, const std::string& name, const Tensor& t) {
    auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    std::uint32_t nl = static_cast<std::uint32_t>(name.size());
    put(&nl, 4);
    put(name.data(), name.size());
    std::uint32_t rank = static_cast<std::uint32_t>(t.shape.size());
    put(&rank, 4);
    for (auto e : t.shape) {
        std::uint64_t u = static_cast<std::uint64_t>(e);
        put(&u, 8);
    }
    put(t.data.data(), t.data.size() * 8);
}

}  // namespace

void ParameterStore::save(const std::string& path) const {
    std::string payload;
    for (const auto& name : order_) {
        const auto& e = entries_.at(name);
        put_record(payload, name, e.value);
        put_record(payload, "opt.m/" + name, e.m);
        put_record(payload, "opt.v/" + name, e.v);
    }
    std::uint32_t crc = Crc32::of(payload.data(), payload.size());

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointError::Kind::io, "cannot open for write: " + path);
    f.write(kMagic, 8);
    f.write(reinterpret_cast<const char*>(&kVersion), 4);
    std::uint64_t step = step_;
    f.write(reinterpret_cast<const char*>(&step), 8);
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    f.write(reinterpret_cast<const char*>(&crc), 4);
    if (!f) throw CheckpointError(CheckpointError::Kind::io, "write failed: " + path);
}

void ParameterStore::load(const std::string& path, bool strict) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(CheckpointError::Kind::io, "cannot open for read: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 + 4 + 8 + 4) throw CheckpointError(CheckpointError::Kind::truncated, "file too short: " + path);
    if (std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw CheckpointError(CheckpointError::Kind::bad_magic, "bad magic in " + path);
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 8, 4);
    if (version != kVersion)
        throw CheckpointError(CheckpointError::Kind::bad_version,
                              "unsupported checkpoint version " + std::to_string(version));
    std::uint64_t step;
    std::memcpy(&step, bytes.data() + 12, 8);

    const std::size_t payload_begin = 20;
    const std::size_t payload_end = bytes.size() - 4;
    std::uint32_t file_crc;
    std::memcpy(&file_crc, bytes.data() + payload_end, 4);
    std::uint32_t crc = Crc32::of(bytes.data() + payload_begin, payload_end - payload_begin);
    if (crc != file_crc) throw CheckpointError(CheckpointError::Kind::bad_crc, "CRC mismatch in " + path);

    std::size_t pos = payload_begin;
    auto need = [&](std::size_t n) {
        if (pos + n > payload_end) throw CheckpointError(CheckpointError::Kind::truncated, "truncated record in " + path);
    };
    while (pos < payload_end) {
        need(4);
        std::uint32_t nl;
        std::memcpy(&nl, bytes.data() + pos, 4);
        pos += 4;
        need(nl);
        std::string name(bytes.data() + pos, nl);
        pos += nl;
        need(4);
        std::uint32_t rank;
        std::memcpy(&rank, bytes.data() + pos, 4);
        pos += 4;
        Shape shape(rank);
        need(8ull * rank);
        for (std::uint32_t i = 0; i < rank; ++i) {
            std::uint64_t e;
            std::memcpy(&e, bytes.data() + pos, 8);
            pos += 8;
            shape[i] = static_cast<std::int64_t>(e);
        }
        std::size_t n = static_cast<std::size_t>(numel(shape));
        need(n * 8);

        std::string base = name;
        Tensor* dst = nullptr;
        int slot = 0;  // 0=value 1=m 2=v
        if (base.rfind("opt.m/", 0) == 0) {
            base = base.substr(6);
            slot = 1;
        } else if (base.rfind("opt.v/", 0) == 0) {
            base = base.substr(6);
            slot = 2;
        }
        auto it = entries_.find(base);
        if (it == entries_.end()) {
            if (strict)
                throw CheckpointError(CheckpointError::Kind::unknown_tensor, "unknown tensor name: " + name);
            create(base, shape);
            it = entries_.find(base);
        }
        Tensor& t = slot == 0 ? it->second.value : slot == 1 ? it->second.m : it->second.v;
        if (t.shape != shape)
            throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                                  "shape mismatch for " + name + ": file " + shape_str(shape) +
                                      " vs store " + shape_str(t.shape));
        dst = &t;
        std::memcpy(dst->data.data(), bytes.data() + pos, n * 8);
        pos += n * 8;
    }
    step_ = step;
}

}  // namespace sadm
