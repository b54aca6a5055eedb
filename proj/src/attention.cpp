#include "sadm/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace sadm {

namespace {

// Fan-in scaled init for linear maps and the embedding projection.
void init_linear(ParameterStore& store, const std::string& name, Shape shape, std::int64_t fan_in,
                 Rng& rng) {
    Tensor& w = store.create(name, std::move(shape));
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : w.data) x = stddev * rng.normal();
}

void init_block(ParameterStore& store, const std::string& scope, std::int64_t dim, Rng& rng) {
    const std::int64_t hidden = 2 * dim;
    store.create(scope + ".ln1.g", {dim}).data.assign(static_cast<std::size_t>(dim), 1.0);
    store.create(scope + ".ln1.b", {dim});
    for (const char* n : {"q", "k", "v", "o"}) {
        init_linear(store, scope + "." + n + ".w", {dim, dim}, dim, rng);
        store.create(scope + "." + n + ".b", {dim});
    }
    store.create(scope + ".ln2.g", {dim}).data.assign(static_cast<std::size_t>(dim), 1.0);
    store.create(scope + ".ln2.b", {dim});
    init_linear(store, scope + ".mlp1.w", {dim, hidden}, dim, rng);
    store.create(scope + ".mlp1.b", {hidden});
    init_linear(store, scope + ".mlp2.w", {hidden, dim}, hidden, rng);
    store.create(scope + ".mlp2.b", {dim});
}

}  // namespace

void AttnConfig::validate(const Shape& frame_shape) const {
    if (frame_shape.size() != 3)
        throw std::invalid_argument("attention: frame shape must be (W,H,D), got " + shape_str(frame_shape));
    if (blocks < 1) throw std::invalid_argument("attention: blocks must be >= 1");
    if (dim < 1 || heads < 1 || dim % heads != 0)
        throw std::invalid_argument("attention: dim must be a positive multiple of heads");
    if (l_max < 1) throw std::invalid_argument("attention: l_max must be >= 1");
    if (proj_kernel < 1 || proj_kernel % 2 == 0)
        throw std::invalid_argument("attention: proj_kernel must be odd and >= 1");
    const std::int64_t pow2 = std::int64_t(1) << blocks;
    for (int i = 0; i < 3; ++i) {
        if (window[static_cast<std::size_t>(i)] < 1 ||
            frame_shape[static_cast<std::size_t>(i)] % window[static_cast<std::size_t>(i)] != 0)
            throw std::invalid_argument("attention: frame extents " + shape_str(frame_shape) +
                                        " not divisible by window");
        const std::int64_t g = frame_shape[static_cast<std::size_t>(i)] / window[static_cast<std::size_t>(i)];
        if (g % pow2 != 0)
            throw std::invalid_argument("attention: token grid extent " + std::to_string(g) +
                                        " not divisible by 2^" + std::to_string(blocks));
    }
}

AttentionModule::AttentionModule(AttnConfig cfg, Shape frame_shape, ParameterStore& store, Rng& init_rng,
                                 std::string prefix)
    : cfg_(cfg), frame_shape_(std::move(frame_shape)), store_(&store), prefix_(std::move(prefix)) {
    cfg_.validate(frame_shape_);
    for (int i = 0; i < 3; ++i)
        grid_[static_cast<std::size_t>(i)] =
            frame_shape_[static_cast<std::size_t>(i)] / cfg_.window[static_cast<std::size_t>(i)];
    const std::int64_t sites = grid_[0] * grid_[1] * grid_[2];
    const std::int64_t wsize = cfg_.window[0] * cfg_.window[1] * cfg_.window[2];

    init_linear(store, prefix_ + ".embed.w", {cfg_.dim, 1, cfg_.window[0], cfg_.window[1], cfg_.window[2]},
                wsize, init_rng);
    store.create(prefix_ + ".embed.b", {cfg_.dim});
    // Positional tables must be nonzero so missing frames keep their
    // temporal identity; checked at init.
    Tensor& pt = store.create_normal(prefix_ + ".pos.temporal", {cfg_.l_max, cfg_.dim}, 0.02, init_rng);
    Tensor& ps = store.create_normal(prefix_ + ".pos.spatial", {sites, cfg_.dim}, 0.02, init_rng);
    for (std::int64_t r = 0; r < cfg_.l_max; ++r) {
        double s = 0.0;
        for (std::int64_t j = 0; j < cfg_.dim; ++j) s += std::abs(pt[r * cfg_.dim + j]);
        if (s == 0.0) pt[r * cfg_.dim] = 0.02;
    }
    for (std::int64_t r = 0; r < sites; ++r) {
        double s = 0.0;
        for (std::int64_t j = 0; j < cfg_.dim; ++j) s += std::abs(ps[r * cfg_.dim + j]);
        if (s == 0.0) ps[r * cfg_.dim] = 0.02;
    }

    for (std::int64_t l = 0; l < cfg_.blocks; ++l) {
        const std::string scope = prefix_ + ".tenc" + std::to_string(l);
        init_block(store, scope, cfg_.dim, init_rng);
        init_linear(store, scope + ".reduce.w", {8 * cfg_.dim, cfg_.dim}, 8 * cfg_.dim, init_rng);
        store.create(scope + ".reduce.b", {cfg_.dim});
        init_block(store, prefix_ + ".sdec" + std::to_string(l), cfg_.dim, init_rng);
    }
    const std::int64_t pk = cfg_.proj_kernel;
    init_linear(store, prefix_ + ".out.w", {1, cfg_.l_max * cfg_.dim, pk, pk, pk},
                cfg_.l_max * cfg_.dim * pk * pk * pk, init_rng);
    store.create(prefix_ + ".out.b", {1});
}

Var AttentionModule::P(Tape& t, const std::string& name) const {
    return t.param(*store_, prefix_ + "." + name);
}

// Pre-norm multi-head self-attention along axis 1 of x (B, S, dim), then a
// pre-norm MLP, both residual.
Var AttentionModule::attention_mlp_block(Tape& t, Var x, const std::string& scope) const {
    const Shape& sh = t.value(x).shape;
    const std::int64_t B = sh[0], S = sh[1], dim = sh[2];
    const std::int64_t H = cfg_.heads, dh = dim / H;

    auto affine_ln = [&](Var in, const std::string& ln) {
        Var n = t.layer_norm(in);
        return t.add_rowwise(t.mul_rowwise(n, P(t, scope + "." + ln + ".g")), P(t, scope + "." + ln + ".b"));
    };
    auto linear = [&](Var in, const std::string& nm) {
        return t.add_rowwise(t.matmul(in, P(t, scope + "." + nm + ".w")), P(t, scope + "." + nm + ".b"));
    };
    auto heads_of = [&](Var in) {  // (B,S,dim) -> (B,H,S,dh)
        return t.permute(t.reshape(in, {B, S, H, dh}), {0, 2, 1, 3});
    };

    Var h = affine_ln(x, "ln1");
    Var q = heads_of(linear(h, "q"));
    Var k = heads_of(linear(h, "k"));
    Var v = heads_of(linear(h, "v"));
    Var scores = t.scale(t.matmul(q, t.permute(k, {0, 1, 3, 2})), 1.0 / std::sqrt(static_cast<double>(dh)));
    Var att = t.softmax(scores);
    Var ctx = t.reshape(t.permute(t.matmul(att, v), {0, 2, 1, 3}), {B, S, dim});
    Var after_attn = t.add(x, linear(ctx, "o"));

    Var h2 = affine_ln(after_attn, "ln2");
    Var m = t.silu(linear(h2, "mlp1"));
    return t.add(after_attn, linear(m, "mlp2"));
}

Var AttentionModule::embed_tokens(Tape& t, const std::vector<Tensor>& frames,
                                  const std::vector<bool>& mask) const {
    if (frames.empty() || frames.size() != mask.size())
        throw std::invalid_argument("embed_tokens: frames/mask length mismatch or empty");
    if (static_cast<std::int64_t>(frames.size()) > cfg_.l_max)
        throw std::invalid_argument("embed_tokens: sequence longer than l_max");
    const std::int64_t Lp = static_cast<std::int64_t>(frames.size());
    const std::int64_t S = grid_[0] * grid_[1] * grid_[2];

    Var w_embed = P(t, "embed.w");
    Var tokens{};
    for (std::int64_t k = 0; k < Lp; ++k) {
        if (frames[static_cast<std::size_t>(k)].shape != frame_shape_)
            throw std::invalid_argument("embed_tokens: frame " + std::to_string(k) + " has shape " +
                                        shape_str(frames[static_cast<std::size_t>(k)].shape) + ", expected " +
                                        shape_str(frame_shape_));
        Tensor content = mask[static_cast<std::size_t>(k)] ? frames[static_cast<std::size_t>(k)]
                                                           : Tensor::zeros(frame_shape_);
        Shape in_shape = frame_shape_;
        in_shape.insert(in_shape.begin(), 1);
        Var fx = t.leaf(Tensor(in_shape, std::move(content.data)));
        Var tok = t.conv3d(fx, w_embed, {cfg_.window[0], cfg_.window[1], cfg_.window[2]});
        tok = t.reshape(t.permute(t.reshape(tok, {cfg_.dim, S}), {1, 0}), {1, S, cfg_.dim});
        tokens = tokens.valid() ? t.concat0(tokens, tok) : tok;
    }
    tokens = t.add_rowwise(tokens, P(t, "embed.b"));

    Var pos_t = t.slice0(P(t, "pos.temporal"), 0, Lp);                      // (L', dim)
    pos_t = t.upsample_nearest(t.reshape(pos_t, {Lp, 1, cfg_.dim}), {1, S, 1});
    Var pos_s = t.upsample_nearest(t.reshape(P(t, "pos.spatial"), {1, S, cfg_.dim}), {Lp, 1, 1});
    return t.add(t.add(tokens, pos_t), pos_s);
}

Var AttentionModule::temporal_encoder(Tape& t, Var tokens) const {
    const Shape& sh = t.value(tokens).shape;
    const std::int64_t Lp = sh[0];
    Var x = t.permute(tokens, {1, 0, 2});  // (S, L', dim): batch over spatial sites
    auto g = grid_;
    for (std::int64_t l = 0; l < cfg_.blocks; ++l) {
        const std::string scope = "tenc" + std::to_string(l);
        x = attention_mlp_block(t, x, scope);
        // space-to-depth over the site grid, then project 8*dim -> dim; the
        // grid halves per axis while the token width stays fixed.
        x = t.reshape(x, {g[0] / 2, 2, g[1] / 2, 2, g[2] / 2, 2, Lp, cfg_.dim});
        x = t.permute(x, {0, 2, 4, 6, 1, 3, 5, 7});
        x = t.reshape(x, {(g[0] / 2) * (g[1] / 2) * (g[2] / 2), Lp, 8 * cfg_.dim});
        x = t.add_rowwise(t.matmul(x, P(t, scope + ".reduce.w")), P(t, scope + ".reduce.b"));
        for (auto& e : g) e /= 2;
    }
    return x;  // (S / 8^N, L', dim)
}

Var AttentionModule::spatial_decoder(Tape& t, Var enc) const {
    const Shape& sh = t.value(enc).shape;
    const std::int64_t Lp = sh[1];
    Var x = t.permute(enc, {1, 0, 2});  // (L', sites, dim): batch over frames
    std::array<std::int64_t, 3> g;
    for (int i = 0; i < 3; ++i) g[static_cast<std::size_t>(i)] = grid_[static_cast<std::size_t>(i)] >> cfg_.blocks;
    for (std::int64_t l = 0; l < cfg_.blocks; ++l) {
        x = attention_mlp_block(t, x, "sdec" + std::to_string(l));
        x = t.reshape(x, {Lp, g[0], g[1], g[2], cfg_.dim});
        x = t.upsample_nearest(x, {1, 2, 2, 2, 1});
        for (auto& e : g) e *= 2;
        x = t.reshape(x, {Lp, g[0] * g[1] * g[2], cfg_.dim});
    }
    return x;  // (L', S, dim)
}

Var AttentionModule::project_signal(Tape& t, Var dec) const {
    const Shape& sh = t.value(dec).shape;
    const std::int64_t Lp = sh[0];
    Var x = t.reshape(dec, {Lp, grid_[0], grid_[1], grid_[2], cfg_.dim});
    // Channel layout (frame-major, dim-minor) so a length-L' prefix uses the
    // first L'*dim rows of the projection kernel.
    x = t.permute(x, {0, 4, 1, 2, 3});  // (L', dim, gw, gh, gd)
    x = t.reshape(x, {Lp * cfg_.dim, grid_[0], grid_[1], grid_[2]});
    x = t.upsample_nearest(x, {1, cfg_.window[0], cfg_.window[1], cfg_.window[2]});
    // Slice the projection kernel to the first L'*dim input channels; a
    // shorter prefix is equivalent to zero-padding the temporal slots.
    const std::int64_t pk = cfg_.proj_kernel;
    Var w_full = t.reshape(P(t, "out.w"), {cfg_.l_max * cfg_.dim, pk * pk * pk});
    Var w = t.reshape(t.slice0(w_full, 0, Lp * cfg_.dim), {1, Lp * cfg_.dim, pk, pk, pk});
    Var c = t.conv3d(x, w, {1, 1, 1}, {pk / 2, pk / 2, pk / 2});
    c = t.add_channelwise(c, P(t, "out.b"));
    return t.reshape(c, frame_shape_);
}

Var AttentionModule::condition(Tape& t, const std::vector<Tensor>& frames,
                               const std::vector<bool>& mask) const {
    Var tok = embed_tokens(t, frames, mask);
    Var enc = temporal_encoder(t, tok);
    Var dec = spatial_decoder(t, enc);
    return project_signal(t, dec);
}

}  // namespace sadm
