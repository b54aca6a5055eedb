#include "sadm/tape.hpp"

#include <cmath>
#include <cstring>

#include "sadm/kernels.hpp"
#include "sadm/params.hpp"

namespace sadm {

namespace {

// out[m x k] += a[m x n] * b[k x n]^T
void acc_ab_t(const double* a, const double* b, double* out,
              std::int64_t m, std::int64_t n, std::int64_t k) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const double* ar = a + i * n;
        double* orow = out + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double* br = b + p * n;
            double s = 0.0;
            for (std::int64_t j = 0; j < n; ++j) s += ar[j] * br[j];
            orow[p] += s;
        }
    }
}

// out[k x n] += a[m x k]^T * b[m x n]
void acc_at_b(const double* a, const double* b, double* out,
              std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* br = b + i * n;
        const double* ar = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = ar[p];
            double* orow = out + p * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] += av * br[j];
        }
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::int32_t Tape::check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::invalid_argument("tape: invalid variable id");
    return v.id;
}

Tensor& Tape::grad_buf(std::int32_t id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty() && n.value.size() > 0) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (n.grad.data.empty())
        throw std::invalid_argument("tape: gradient not populated (run backward first)");
    return n.grad;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::param(ParameterStore& store, const std::string& name) {
    if (store_ && store_ != &store)
        throw std::invalid_argument("tape: parameters from two stores on one tape");
    store_ = &store;
    Var v = leaf(store.entry(name).value, true);
    param_nodes_.emplace_back(v.id, name);
    return v;
}

Var Tape::record(Tensor value, std::vector<Var> inputs, std::function<void(Tape&, Node&)> backprop) {
    Node n;
    n.value = std::move(value);
    for (Var v : inputs) {
        n.inputs.push_back(check(v));
        if (nodes_[static_cast<std::size_t>(v.id)].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "add");
    Tensor out = Tensor::zeros(av.shape);
    kernels::add(av.data.data(), bv.data.data(), out.data.data(), out.size());
    return record(std::move(out), {a, b}, [](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        for (int i = 0; i < 2; ++i)
            if (Tensor* gi = t.nodes_[static_cast<std::size_t>(self.inputs[i])].requires_grad
                                 ? &t.grad_buf(self.inputs[i])
                                 : nullptr)
                kernels::axpy(1.0, g.data.data(), gi->data.data(), g.size());
    });
}

Var Tape::sub(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "sub");
    Tensor out = Tensor::zeros(av.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return record(std::move(out), {a, b}, [](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
            kernels::axpy(1.0, g.data.data(), t.grad_buf(self.inputs[0]).data.data(), g.size());
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad)
            kernels::axpy(-1.0, g.data.data(), t.grad_buf(self.inputs[1]).data.data(), g.size());
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "mul");
    Tensor out = Tensor::zeros(av.shape);
    kernels::mul(av.data.data(), bv.data.data(), out.data.data(), out.size());
    return record(std::move(out), {a, b}, [](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        const Tensor& av = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
        const Tensor& bv = t.nodes_[static_cast<std::size_t>(self.inputs[1])].value;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) {
            Tensor& ga = t.grad_buf(self.inputs[0]);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad) {
            Tensor& gb = t.grad_buf(self.inputs[1]);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var Tape::scale(Var a, double s) {
    const Tensor& av = value(a);
    Tensor out = Tensor::zeros(av.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = s * av[i];
    return record(std::move(out), {a}, [s](Tape& t, Node& self) {
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
            kernels::axpy(s, self.grad.data.data(), t.grad_buf(self.inputs[0]).data.data(), self.grad.size());
    });
}

Var Tape::add_scalar(Var a, double s) {
    const Tensor& av = value(a);
    Tensor out = Tensor::zeros(av.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] + s;
    return record(std::move(out), {a}, [](Tape& t, Node& self) {
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
            kernels::axpy(1.0, self.grad.data.data(), t.grad_buf(self.inputs[0]).data.data(), self.grad.size());
    });
}

Var Tape::exp(Var a) {
    const Tensor& av = value(a);
    Tensor out = Tensor::zeros(av.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
    return record(std::move(out), {a}, [](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        for (std::int64_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * self.value[i];
    });
}

Var Tape::silu(Var a) {
    const Tensor& av = value(a);
    Tensor out = Tensor::zeros(av.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * sigmoid(av[i]);
    return record(std::move(out), {a}, [](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        const Tensor& av = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        for (std::int64_t i = 0; i < self.grad.size(); ++i) {
            const double s = sigmoid(av[i]);
            ga[i] += self.grad[i] * s * (1.0 + av[i] * (1.0 - s));
        }
    });
}

Var Tape::add_rowwise(Var a, Var bias) {
    const Tensor& av = value(a);
    const Tensor& bv = value(bias);
    const std::int64_t n = av.shape.empty() ? 1 : av.shape.back();
    if (bv.rank() != 1 || bv.shape[0] != n)
        throw std::invalid_argument("add_rowwise: bias " + shape_str(bv.shape) + " vs last axis of " +
                                    shape_str(av.shape));
    Tensor out = Tensor::zeros(av.shape);
    const std::int64_t rows = av.size() / n;
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < n; ++j) out[r * n + j] = av[r * n + j] + bv[j];
    return record(std::move(out), {a, bias}, [n](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        const std::int64_t rows = g.size() / n;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
            kernels::axpy(1.0, g.data.data(), t.grad_buf(self.inputs[0]).data.data(), g.size());
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad) {
            Tensor& gb = t.grad_buf(self.inputs[1]);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
        }
    });
}

Var Tape::mul_rowwise(Var a, Var gain) {
    const Tensor& av = value(a);
    const Tensor& gv = value(gain);
    const std::int64_t n = av.shape.empty() ? 1 : av.shape.back();
    if (gv.rank() != 1 || gv.shape[0] != n)
        throw std::invalid_argument("mul_rowwise: gain " + shape_str(gv.shape) + " vs last axis of " +
                                    shape_str(av.shape));
    Tensor out = Tensor::zeros(av.shape);
    const std::int64_t rows = av.size() / n;
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < n; ++j) out[r * n + j] = av[r * n + j] * gv[j];
    return record(std::move(out), {a, gain}, [n](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        const Tensor& av = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
        const Tensor& gv = t.nodes_[static_cast<std::size_t>(self.inputs[1])].value;
        const std::int64_t rows = g.size() / n;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) {
            Tensor& ga = t.grad_buf(self.inputs[0]);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < n; ++j) ga[r * n + j] += g[r * n + j] * gv[j];
        }
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad) {
            Tensor& gg = t.grad_buf(self.inputs[1]);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < n; ++j) gg[j] += g[r * n + j] * av[r * n + j];
        }
    });
}

Var Tape::add_channelwise(Var a, Var bias) {
    const Tensor& av = value(a);
    const Tensor& bv = value(bias);
    if (av.rank() < 1 || bv.rank() != 1 || bv.shape[0] != av.shape[0])
        throw std::invalid_argument("add_channelwise: bias " + shape_str(bv.shape) + " vs first axis of " +
                                    shape_str(av.shape));
    const std::int64_t c = av.shape[0];
    const std::int64_t inner = av.size() / c;
    Tensor out = Tensor::zeros(av.shape);
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t i = 0; i < inner; ++i) out[ci * inner + i] = av[ci * inner + i] + bv[ci];
    return record(std::move(out), {a, bias}, [c, inner](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
            kernels::axpy(1.0, g.data.data(), t.grad_buf(self.inputs[0]).data.data(), g.size());
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad) {
            Tensor& gb = t.grad_buf(self.inputs[1]);
            for (std::int64_t ci = 0; ci < c; ++ci) {
                double s = 0.0;
                for (std::int64_t i = 0; i < inner; ++i) s += g[ci * inner + i];
                gb[ci] += s;
            }
        }
    });
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() < 2 || bv.rank() < 2)
        throw std::invalid_argument("matmul: need rank >= 2, got " + shape_str(av.shape) + " and " +
                                    shape_str(bv.shape));
    const std::int64_t m = av.shape[av.rank() - 2];
    const std::int64_t k = av.shape[av.rank() - 1];
    const std::int64_t k2 = bv.shape[bv.rank() - 2];
    const std::int64_t n = bv.shape[bv.rank() - 1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner extents differ, " + shape_str(av.shape) + " x " +
                                    shape_str(bv.shape));
    const bool shared_b = bv.rank() == 2 && av.rank() > 2;
    Shape lead_a(av.shape.begin(), av.shape.end() - 2);
    if (!shared_b) {
        Shape lead_b(bv.shape.begin(), bv.shape.end() - 2);
        if (lead_a != lead_b)
            throw std::invalid_argument("matmul: batch extents differ, " + shape_str(av.shape) + " x " +
                                        shape_str(bv.shape));
    }
    const std::int64_t batch = numel(lead_a);
    Shape out_shape = lead_a;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor out = Tensor::zeros(out_shape);
    for (std::int64_t bi = 0; bi < batch; ++bi)
        kernels::matmul_acc(av.data.data() + bi * m * k,
                            bv.data.data() + (shared_b ? 0 : bi * k * n),
                            out.data.data() + bi * m * n, m, k, n);
    return record(std::move(out), {a, b}, [m, k, n, batch, shared_b](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        const Tensor& av = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
        const Tensor& bv = t.nodes_[static_cast<std::size_t>(self.inputs[1])].value;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) {
            Tensor& ga = t.grad_buf(self.inputs[0]);
            for (std::int64_t bi = 0; bi < batch; ++bi)
                acc_ab_t(g.data.data() + bi * m * n, bv.data.data() + (shared_b ? 0 : bi * k * n),
                         ga.data.data() + bi * m * k, m, n, k);
        }
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad) {
            Tensor& gb = t.grad_buf(self.inputs[1]);
            for (std::int64_t bi = 0; bi < batch; ++bi)
                acc_at_b(av.data.data() + bi * m * k, g.data.data() + bi * m * n,
                         gb.data.data() + (shared_b ? 0 : bi * k * n), m, k, n);
        }
    });
}

Var Tape::conv3d(Var x, Var w, std::array<std::int64_t, 3> stride, std::array<std::int64_t, 3> pad) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    if (xv.rank() != 4 || wv.rank() != 5)
        throw std::invalid_argument("conv3d: want input (C,W,H,D) and kernel (Cout,Cin,kw,kh,kd), got " +
                                    shape_str(xv.shape) + " and " + shape_str(wv.shape));
    if (wv.shape[1] != xv.shape[0])
        throw std::invalid_argument("conv3d: channel mismatch, input " + shape_str(xv.shape) +
                                    " kernel " + shape_str(wv.shape));
    auto cd = kernels::conv_dims(xv.shape[0], xv.shape[1], xv.shape[2], xv.shape[3],
                                 wv.shape[2], wv.shape[3], wv.shape[4],
                                 stride[0], stride[1], stride[2], pad[0], pad[1], pad[2]);
    const std::int64_t cout = wv.shape[0];
    const std::int64_t krow = cd.cin * cd.kw * cd.kh * cd.kd;
    const std::int64_t np = cd.ow * cd.oh * cd.od;
    Tensor out = Tensor::zeros({cout, cd.ow, cd.oh, cd.od});
    if (cout == 1) {
        // direct path: the column matrix for a single-output-channel head is
        // by far the largest transient buffer of a step, and the direct loops
        // are bit-identical to im2col + matmul (same accumulation order)
        kernels::conv1out_forward(xv.data.data(), wv.data.data(), cd, out.data.data());
        return record(std::move(out), {x, w}, [cd](Tape& t, Node& self) {
            const Tensor& g = self.grad;
            const Tensor& xv = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
            const Tensor& wv = t.nodes_[static_cast<std::size_t>(self.inputs[1])].value;
            if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad)
                kernels::conv1out_grad_w(xv.data.data(), g.data.data(), cd,
                                         t.grad_buf(self.inputs[1]).data.data());
            if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
                kernels::conv1out_grad_x(wv.data.data(), g.data.data(), cd,
                                         t.grad_buf(self.inputs[0]).data.data());
        });
    }
    std::vector<double> cols(static_cast<std::size_t>(krow * np));
    kernels::im2col(xv.data.data(), cd, cols.data());
    kernels::matmul_acc(wv.data.data(), cols.data(), out.data.data(), cout, krow, np);
    // cols are recomputed in backward instead of cached; the buffers are the
    // largest transient allocations in a training step.
    return record(std::move(out), {x, w}, [cd, cout, krow, np](Tape& t, Node& self) {
        const Tensor& g = self.grad;
        const Tensor& xv = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
        const Tensor& wv = t.nodes_[static_cast<std::size_t>(self.inputs[1])].value;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad) {
            std::vector<double> cols(static_cast<std::size_t>(krow * np));
            kernels::im2col(xv.data.data(), cd, cols.data());
            acc_ab_t(g.data.data(), cols.data(), t.grad_buf(self.inputs[1]).data.data(), cout, np, krow);
        }
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) {
            std::vector<double> dcols(static_cast<std::size_t>(krow * np), 0.0);
            acc_at_b(wv.data.data(), g.data.data(), dcols.data(), cout, krow, np);
            kernels::col2im(dcols.data(), cd, t.grad_buf(self.inputs[0]).data.data());
        }
    });
}

Var Tape::softmax(Var a) {
    const Tensor& av = value(a);
    if (av.rank() < 1 || av.shape.back() < 1)
        throw std::invalid_argument("softmax: empty axis on " + shape_str(av.shape));
    const std::int64_t n = av.shape.back();
    const std::int64_t rows = av.size() / n;
    Tensor out = Tensor::zeros(av.shape);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = av.data.data() + r * n;
        double* yr = out.data.data() + r * n;
        double mx = xr[0];
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
        double s = 0.0;
        for (std::int64_t j = 0; j < n; ++j) s += (yr[j] = std::exp(xr[j] - mx));
        for (std::int64_t j = 0; j < n; ++j) yr[j] /= s;
    }
    return record(std::move(out), {a}, [n](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        const Tensor& y = self.value;
        const Tensor& g = self.grad;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        const std::int64_t rows = y.size() / n;
        for (std::int64_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
            for (std::int64_t j = 0; j < n; ++j) ga[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
        }
    });
}

Var Tape::layer_norm(Var a, double eps) {
    const Tensor& av = value(a);
    if (av.rank() < 1 || av.shape.back() < 1)
        throw std::invalid_argument("layer_norm: empty axis on " + shape_str(av.shape));
    const std::int64_t n = av.shape.back();
    const std::int64_t rows = av.size() / n;
    Tensor out = Tensor::zeros(av.shape);
    std::vector<double> rstd(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = av.data.data() + r * n;
        double mean = 0.0;
        for (std::int64_t j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<double>(n);
        const double rs = 1.0 / std::sqrt(var + eps);
        rstd[static_cast<std::size_t>(r)] = rs;
        for (std::int64_t j = 0; j < n; ++j) out[r * n + j] = (xr[j] - mean) * rs;
    }
    return record(std::move(out), {a}, [n, rstd = std::move(rstd)](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        const Tensor& y = self.value;
        const Tensor& g = self.grad;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        const std::int64_t rows = y.size() / n;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::int64_t r = 0; r < rows; ++r) {
            double gm = 0.0, gym = 0.0;
            for (std::int64_t j = 0; j < n; ++j) {
                gm += g[r * n + j];
                gym += g[r * n + j] * y[r * n + j];
            }
            gm *= inv_n;
            gym *= inv_n;
            const double rs = rstd[static_cast<std::size_t>(r)];
            for (std::int64_t j = 0; j < n; ++j)
                ga[r * n + j] += rs * (g[r * n + j] - gm - y[r * n + j] * gym);
        }
    });
}

Var Tape::reshape(Var a, Shape shape) {
    const Tensor& av = value(a);
    if (numel(shape) != av.size())
        throw std::invalid_argument("reshape: " + shape_str(av.shape) + " -> " + shape_str(shape) +
                                    " changes element count");
    Tensor out(std::move(shape), av.data);
    return record(std::move(out), {a}, [](Tape& t, Node& self) {
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
            kernels::axpy(1.0, self.grad.data.data(), t.grad_buf(self.inputs[0]).data.data(),
                          self.grad.size());
    });
}

Var Tape::permute(Var a, std::vector<std::int64_t> axes) {
    const Tensor& av = value(a);
    const std::int64_t r = av.rank();
    if (static_cast<std::int64_t>(axes.size()) != r)
        throw std::invalid_argument("permute: axes count != rank of " + shape_str(av.shape));
    Shape out_shape(static_cast<std::size_t>(r));
    for (std::int64_t i = 0; i < r; ++i) out_shape[static_cast<std::size_t>(i)] = av.shape[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];
    Shape in_st = strides_of(av.shape);
    Shape out_st = strides_of(out_shape);
    // gather map: out[i] = in[map[i]]
    std::vector<std::int64_t> map(static_cast<std::size_t>(av.size()));
    const std::int64_t total = av.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t o = 0; o < total; ++o) {
        std::int64_t rem = o, src = 0;
        for (std::int64_t i = 0; i < r; ++i) {
            const std::int64_t idx = rem / out_st[static_cast<std::size_t>(i)];
            rem %= out_st[static_cast<std::size_t>(i)];
            src += idx * in_st[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];
        }
        map[static_cast<std::size_t>(o)] = src;
    }
    Tensor out = Tensor::zeros(out_shape);
    for (std::int64_t o = 0; o < total; ++o) out[o] = av[map[static_cast<std::size_t>(o)]];
    return record(std::move(out), {a}, [map = std::move(map)](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        for (std::int64_t o = 0; o < self.grad.size(); ++o)
            ga[map[static_cast<std::size_t>(o)]] += self.grad[o];
    });
}

Var Tape::slice0(Var a, std::int64_t start, std::int64_t len) {
    const Tensor& av = value(a);
    if (av.rank() < 1 || start < 0 || len < 1 || start + len > av.shape[0])
        throw std::invalid_argument("slice0: [" + std::to_string(start) + "," + std::to_string(start + len) +
                                    ") out of range for " + shape_str(av.shape));
    const std::int64_t inner = av.size() / av.shape[0];
    Shape out_shape = av.shape;
    out_shape[0] = len;
    Tensor out = Tensor::zeros(out_shape);
    std::memcpy(out.data.data(), av.data.data() + start * inner, static_cast<std::size_t>(len * inner) * 8);
    return record(std::move(out), {a}, [start, inner](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        kernels::axpy(1.0, self.grad.data.data(), ga.data.data() + start * inner, self.grad.size());
    });
}

Var Tape::concat0(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != bv.rank() || av.rank() < 1 ||
        !std::equal(av.shape.begin() + 1, av.shape.end(), bv.shape.begin() + 1))
        throw std::invalid_argument("concat0: trailing extents differ, " + shape_str(av.shape) + " vs " +
                                    shape_str(bv.shape));
    Shape out_shape = av.shape;
    out_shape[0] += bv.shape[0];
    Tensor out = Tensor::zeros(out_shape);
    std::memcpy(out.data.data(), av.data.data(), av.data.size() * 8);
    std::memcpy(out.data.data() + av.size(), bv.data.data(), bv.data.size() * 8);
    const std::int64_t na = av.size();
    return record(std::move(out), {a, b}, [na](Tape& t, Node& self) {
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad)
            kernels::axpy(1.0, self.grad.data.data(), t.grad_buf(self.inputs[0]).data.data(), na);
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad)
            kernels::axpy(1.0, self.grad.data.data() + na, t.grad_buf(self.inputs[1]).data.data(),
                          self.grad.size() - na);
    });
}

Var Tape::upsample_nearest(Var a, std::vector<std::int64_t> factors) {
    const Tensor& av = value(a);
    const std::int64_t r = av.rank();
    if (static_cast<std::int64_t>(factors.size()) != r)
        throw std::invalid_argument("upsample_nearest: factor count != rank of " + shape_str(av.shape));
    for (auto f : factors)
        if (f < 1) throw std::invalid_argument("upsample_nearest: factors must be positive integers");
    Shape out_shape(static_cast<std::size_t>(r));
    for (std::int64_t i = 0; i < r; ++i)
        out_shape[static_cast<std::size_t>(i)] = av.shape[static_cast<std::size_t>(i)] * factors[static_cast<std::size_t>(i)];
    Shape in_st = strides_of(av.shape);
    Shape out_st = strides_of(out_shape);
    std::vector<std::int64_t> map(static_cast<std::size_t>(numel(out_shape)));
    const std::int64_t total = numel(out_shape);
#pragma omp parallel for schedule(static)
    for (std::int64_t o = 0; o < total; ++o) {
        std::int64_t rem = o, src = 0;
        for (std::int64_t i = 0; i < r; ++i) {
            const std::int64_t idx = rem / out_st[static_cast<std::size_t>(i)];
            rem %= out_st[static_cast<std::size_t>(i)];
            src += (idx / factors[static_cast<std::size_t>(i)]) * in_st[static_cast<std::size_t>(i)];
        }
        map[static_cast<std::size_t>(o)] = src;
    }
    Tensor out = Tensor::zeros(out_shape);
    for (std::int64_t o = 0; o < total; ++o) out[o] = av[map[static_cast<std::size_t>(o)]];
    return record(std::move(out), {a}, [map = std::move(map)](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        for (std::int64_t o = 0; o < self.grad.size(); ++o)
            ga[map[static_cast<std::size_t>(o)]] += self.grad[o];
    });
}

Var Tape::sum(Var a) {
    const Tensor& av = value(a);
    double s = 0.0;
    for (double x : av.data) s += x;
    return record(Tensor::scalar(s), {a}, [](Tape& t, Node& self) {
        if (!t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) return;
        Tensor& ga = t.grad_buf(self.inputs[0]);
        const double g = self.grad[0];
        for (auto& x : ga.data) x += g;
    });
}

Var Tape::mean_sq_diff(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    require_same_shape(av, bv, "mean_sq_diff");
    double s = 0.0;
    for (std::int64_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        s += d * d;
    }
    const double inv_n = 1.0 / static_cast<double>(av.size());
    return record(Tensor::scalar(s * inv_n), {a, b}, [inv_n](Tape& t, Node& self) {
        const Tensor& av = t.nodes_[static_cast<std::size_t>(self.inputs[0])].value;
        const Tensor& bv = t.nodes_[static_cast<std::size_t>(self.inputs[1])].value;
        const double g = 2.0 * self.grad[0] * inv_n;
        if (t.nodes_[static_cast<std::size_t>(self.inputs[0])].requires_grad) {
            Tensor& ga = t.grad_buf(self.inputs[0]);
            for (std::int64_t i = 0; i < av.size(); ++i) ga[i] += g * (av[i] - bv[i]);
        }
        if (t.nodes_[static_cast<std::size_t>(self.inputs[1])].requires_grad) {
            Tensor& gb = t.grad_buf(self.inputs[1]);
            for (std::int64_t i = 0; i < av.size(); ++i) gb[i] -= g * (av[i] - bv[i]);
        }
    });
}

void Tape::backward(Var loss) {
    Node& ln = node(loss);
    if (ln.value.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(ln.value.shape));
    grad_buf(loss.id)[0] += 1.0;
    for (std::int32_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.requires_grad && n.backprop && !n.grad.data.empty()) n.backprop(*this, n);
    }
    if (store_) {
        for (auto& [id, name] : param_nodes_) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.grad.data.empty()) continue;
            Tensor& dst = store_->entry(name).grad;
            kernels::axpy(1.0, n.grad.data.data(), dst.data.data(), dst.size());
        }
    }
}

}  // namespace sadm
