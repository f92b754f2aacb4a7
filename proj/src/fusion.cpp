#include "overlay/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "overlay/metrics.hpp"

namespace overlay {

namespace {

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

struct GruLayout {
    int in = 0, hid = 0;
    size_t Wz = 0, Uz = 0, bz = 0, Wr = 0, Ur = 0, br = 0, Wh = 0, Uh = 0, bh = 0;
};

struct ConvLayout {
    int cin = 0, cout = 0;
    size_t w = 0, b = 0;
};

struct Layout {
    size_t embed = 0;
    GruLayout text, pos;
    std::array<ConvLayout, 3> conv;
    size_t proj_w = 0, proj_b = 0;
    size_t head_w = 0, head_b = 0;
    size_t total = 0;
    int concat_dim = 0;
};

GruLayout gru_layout(int in, int hid, size_t& off) {
    GruLayout g;
    g.in = in;
    g.hid = hid;
    auto take = [&off](size_t n) { size_t o = off; off += n; return o; };
    g.Wz = take(static_cast<size_t>(hid) * in);
    g.Uz = take(static_cast<size_t>(hid) * hid);
    g.bz = take(hid);
    g.Wr = take(static_cast<size_t>(hid) * in);
    g.Ur = take(static_cast<size_t>(hid) * hid);
    g.br = take(hid);
    g.Wh = take(static_cast<size_t>(hid) * in);
    g.Uh = take(static_cast<size_t>(hid) * hid);
    g.bh = take(hid);
    return g;
}

Layout make_layout(const FusionConfig& c) {
    Layout L;
    size_t off = 0;
    L.embed = off;
    off += static_cast<size_t>(kCharTableSize) * c.char_embed_dim;
    L.text = gru_layout(c.char_embed_dim, c.text_hidden, off);
    L.pos = gru_layout(kPosFeatureDim, c.pos_hidden, off);
    int cin = 1;
    for (int l = 0; l < 3; ++l) {
        L.conv[l].cin = cin;
        L.conv[l].cout = c.conv_channels[l];
        L.conv[l].w = off;
        off += static_cast<size_t>(c.conv_channels[l]) * cin * 9;
        L.conv[l].b = off;
        off += c.conv_channels[l];
        cin = c.conv_channels[l];
    }
    L.proj_w = off;
    off += static_cast<size_t>(c.image_feature) * cin;
    L.proj_b = off;
    off += c.image_feature;
    L.concat_dim = c.text_hidden + c.pos_hidden + c.image_feature;
    L.head_w = off;
    off += L.concat_dim;
    L.head_b = off;
    off += 1;
    L.total = off;
    return L;
}

// ---------------------------------------------------------------------------
// Small dense helpers (row-major)
// ---------------------------------------------------------------------------

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void matvec_add(const double* W, const double* x, double* out, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* row = W + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) s += row[c] * x[c];
        out[r] += s;
    }
}

void matvec_t_add(const double* W, const double* dy, double* dx, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const double* row = W + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) dx[c] += row[c] * dy[r];
    }
}

void outer_add(double* dW, const double* dy, const double* x, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* row = dW + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) row[c] += dy[r] * x[c];
    }
}

// ---------------------------------------------------------------------------
// GRU cell
// ---------------------------------------------------------------------------

struct GruCache {
    // per step: input, previous hidden, gates, candidate, r*h_prev
    std::vector<std::vector<double>> x, h_prev, z, r, c, rh;
    std::vector<double> h_final;
};

void gru_forward(const double* p, const GruLayout& L,
                 const std::vector<std::vector<double>>& xs, GruCache& cache) {
    const int H = L.hid;
    std::vector<double> h(H, 0.0);
    for (const auto& x : xs) {
        std::vector<double> z(H, 0.0), r(H, 0.0), c(H, 0.0), rh(H);
        for (int i = 0; i < H; ++i) {
            z[i] = p[L.bz + i];
            r[i] = p[L.br + i];
        }
        matvec_add(p + L.Wz, x.data(), z.data(), H, L.in);
        matvec_add(p + L.Uz, h.data(), z.data(), H, H);
        matvec_add(p + L.Wr, x.data(), r.data(), H, L.in);
        matvec_add(p + L.Ur, h.data(), r.data(), H, H);
        for (int i = 0; i < H; ++i) {
            z[i] = sigmoid(z[i]);
            r[i] = sigmoid(r[i]);
            rh[i] = r[i] * h[i];
        }
        for (int i = 0; i < H; ++i) c[i] = p[L.bh + i];
        matvec_add(p + L.Wh, x.data(), c.data(), H, L.in);
        matvec_add(p + L.Uh, rh.data(), c.data(), H, H);
        for (int i = 0; i < H; ++i) c[i] = std::tanh(c[i]);

        cache.x.push_back(x);
        cache.h_prev.push_back(h);
        for (int i = 0; i < H; ++i) h[i] = (1.0 - z[i]) * h[i] + z[i] * c[i];
        cache.z.push_back(std::move(z));
        cache.r.push_back(std::move(r));
        cache.c.push_back(std::move(c));
        cache.rh.push_back(std::move(rh));
    }
    cache.h_final = std::move(h);
}

/// Accumulates parameter gradients into gp; optionally emits per-step input
/// gradients (needed by the embedding table).
void gru_backward(const double* p, const GruLayout& L, const GruCache& cache,
                  const std::vector<double>& dh_final, double* gp,
                  std::vector<std::vector<double>>* dxs) {
    const int H = L.hid;
    std::vector<double> dh = dh_final;
    if (dxs) dxs->assign(cache.x.size(), std::vector<double>(L.in, 0.0));
    for (int t = static_cast<int>(cache.x.size()) - 1; t >= 0; --t) {
        const auto& x = cache.x[t];
        const auto& hp = cache.h_prev[t];
        const auto& z = cache.z[t];
        const auto& r = cache.r[t];
        const auto& c = cache.c[t];
        const auto& rh = cache.rh[t];

        std::vector<double> dh_prev(H, 0.0), dah(H), daz(H), dar(H), drh(H, 0.0);
        for (int i = 0; i < H; ++i) {
            const double dz = dh[i] * (c[i] - hp[i]);
            const double dc = dh[i] * z[i];
            dh_prev[i] += dh[i] * (1.0 - z[i]);
            dah[i] = dc * (1.0 - c[i] * c[i]);
            daz[i] = dz * z[i] * (1.0 - z[i]);
        }
        outer_add(gp + L.Wh, dah.data(), x.data(), H, L.in);
        outer_add(gp + L.Uh, dah.data(), rh.data(), H, H);
        for (int i = 0; i < H; ++i) gp[L.bh + i] += dah[i];
        matvec_t_add(p + L.Uh, dah.data(), drh.data(), H, H);
        for (int i = 0; i < H; ++i) {
            const double dr = drh[i] * hp[i];
            dh_prev[i] += drh[i] * r[i];
            dar[i] = dr * r[i] * (1.0 - r[i]);
        }
        outer_add(gp + L.Wz, daz.data(), x.data(), H, L.in);
        outer_add(gp + L.Uz, daz.data(), hp.data(), H, H);
        outer_add(gp + L.Wr, dar.data(), x.data(), H, L.in);
        outer_add(gp + L.Ur, dar.data(), hp.data(), H, H);
        for (int i = 0; i < H; ++i) {
            gp[L.bz + i] += daz[i];
            gp[L.br + i] += dar[i];
        }
        matvec_t_add(p + L.Uz, daz.data(), dh_prev.data(), H, H);
        matvec_t_add(p + L.Ur, dar.data(), dh_prev.data(), H, H);
        if (dxs) {
            auto& dx = (*dxs)[t];
            matvec_t_add(p + L.Wz, daz.data(), dx.data(), H, L.in);
            matvec_t_add(p + L.Wr, dar.data(), dx.data(), H, L.in);
            matvec_t_add(p + L.Wh, dah.data(), dx.data(), H, L.in);
        }
        dh = std::move(dh_prev);
    }
}

// ---------------------------------------------------------------------------
// Conv stack: 3x3 kernels, stride 2, zero padding 1, tanh
// ---------------------------------------------------------------------------

int conv_out_size(int n) { return (n - 1) / 2 + 1; }

struct ConvCache {
    // act[0] is the input (1 channel); act[l+1] is layer l's post-tanh output
    std::vector<std::vector<double>> act;
    std::vector<int> size;
    std::vector<int> chans;
};

void conv_forward(const double* p, const Layout& L, const std::vector<double>& input,
                  int input_size, ConvCache& cache) {
    cache.act = {input};
    cache.size = {input_size};
    cache.chans = {1};
    for (int l = 0; l < 3; ++l) {
        const auto& cl = L.conv[l];
        const int n = cache.size.back();
        const int m = conv_out_size(n);
        const auto& in = cache.act.back();
        std::vector<double> out(static_cast<size_t>(cl.cout) * m * m);
        for (int co = 0; co < cl.cout; ++co) {
            for (int oy = 0; oy < m; ++oy)
                for (int ox = 0; ox < m; ++ox) {
                    double s = p[cl.b + co];
                    for (int ci = 0; ci < cl.cin; ++ci) {
                        const double* w =
                            p + cl.w + (static_cast<size_t>(co) * cl.cin + ci) * 9;
                        const double* inc = in.data() + static_cast<size_t>(ci) * n * n;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int iy = oy * 2 + ky - 1;
                            if (iy < 0 || iy >= n) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int ix = ox * 2 + kx - 1;
                                if (ix < 0 || ix >= n) continue;
                                s += w[ky * 3 + kx] * inc[iy * n + ix];
                            }
                        }
                    }
                    out[(static_cast<size_t>(co) * m + oy) * m + ox] = std::tanh(s);
                }
        }
        cache.act.push_back(std::move(out));
        cache.size.push_back(m);
        cache.chans.push_back(cl.cout);
    }
}

void conv_backward(const double* p, const Layout& L, const ConvCache& cache,
                   std::vector<double> dout, double* gp) {
    for (int l = 2; l >= 0; --l) {
        const auto& cl = L.conv[l];
        const int n = cache.size[l];
        const int m = cache.size[l + 1];
        const auto& in = cache.act[l];
        const auto& out = cache.act[l + 1];
        std::vector<double> din(static_cast<size_t>(cl.cin) * n * n, 0.0);
        for (int co = 0; co < cl.cout; ++co) {
            for (int oy = 0; oy < m; ++oy)
                for (int ox = 0; ox < m; ++ox) {
                    const size_t oi = (static_cast<size_t>(co) * m + oy) * m + ox;
                    const double a = out[oi];
                    const double dpre = dout[oi] * (1.0 - a * a);
                    if (dpre == 0.0) continue;
                    gp[cl.b + co] += dpre;
                    for (int ci = 0; ci < cl.cin; ++ci) {
                        const size_t wbase =
                            cl.w + (static_cast<size_t>(co) * cl.cin + ci) * 9;
                        double* dinc = din.data() + static_cast<size_t>(ci) * n * n;
                        const double* inc = in.data() + static_cast<size_t>(ci) * n * n;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int iy = oy * 2 + ky - 1;
                            if (iy < 0 || iy >= n) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int ix = ox * 2 + kx - 1;
                                if (ix < 0 || ix >= n) continue;
                                gp[wbase + ky * 3 + kx] += dpre * inc[iy * n + ix];
                                dinc[iy * n + ix] += dpre * p[wbase + ky * 3 + kx];
                            }
                        }
                    }
                }
        }
        dout = std::move(din);
    }
}

// ---------------------------------------------------------------------------
// Record preprocessing
// ---------------------------------------------------------------------------

int char_index(char ch) {
    const unsigned u = static_cast<unsigned char>(ch);
    if (u >= 32 && u < 128) return static_cast<int>(u) - 32;
    return kCharTableSize - 1;  // unknown
}

/// Tokens in reading order (top-to-bottom, left-to-right), capped at
/// max_tokens.
std::vector<OcrToken> ordered_tokens(const std::vector<OcrToken>& tokens, int max_tokens) {
    std::vector<OcrToken> out = tokens;
    std::stable_sort(out.begin(), out.end(), [](const OcrToken& a, const OcrToken& b) {
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    if (static_cast<int>(out.size()) > max_tokens) out.resize(max_tokens);
    return out;
}

std::vector<int> char_sequence(const std::vector<OcrToken>& ordered, int max_chars) {
    std::vector<int> seq;
    for (size_t i = 0; i < ordered.size(); ++i) {
        if (i > 0) seq.push_back(char_index(' '));
        for (char ch : ordered[i].text) seq.push_back(char_index(ch));
        if (static_cast<int>(seq.size()) >= max_chars) break;
    }
    if (static_cast<int>(seq.size()) > max_chars) seq.resize(max_chars);
    return seq;
}

struct ForwardCache {
    std::vector<int> chars;
    GruCache text, pos;
    ConvCache conv;
    std::vector<double> pooled;   // after GAP
    std::vector<double> img_feat; // after projection
    std::vector<double> concat;
    double logit = 0.0;
    double prob = 0.0;
};

void forward_cached(const FusionParams& params, const Layout& L,
                    const TrainRecord& record, ForwardCache& fc) {
    const auto& cfg = params.config;
    if (params.flat.size() != L.total)
        throw ContractError("fusion params size does not match config layout");
    const double* p = params.flat.data();

    const auto ordered = ordered_tokens(record.tokens, cfg.max_tokens);

    // text branch
    fc.chars = char_sequence(ordered, cfg.max_chars);
    std::vector<std::vector<double>> xs;
    xs.reserve(fc.chars.size());
    for (int ci : fc.chars) {
        const double* row = p + L.embed + static_cast<size_t>(ci) * cfg.char_embed_dim;
        xs.emplace_back(row, row + cfg.char_embed_dim);
    }
    gru_forward(p, L.text, xs, fc.text);
    if (fc.text.h_final.empty()) fc.text.h_final.assign(cfg.text_hidden, 0.0);

    // position branch
    const auto feats = encode_positions(ordered);
    std::vector<std::vector<double>> ps;
    for (const auto& f : feats) ps.emplace_back(f.begin(), f.end());
    gru_forward(p, L.pos, ps, fc.pos);
    if (fc.pos.h_final.empty()) fc.pos.h_final.assign(cfg.pos_hidden, 0.0);

    // image branch
    const Image resized = (record.image.width == cfg.encoder_input &&
                           record.image.height == cfg.encoder_input)
                              ? record.image
                              : resize_area(record.image, cfg.encoder_input,
                                            cfg.encoder_input);
    conv_forward(p, L, resized.pixels, cfg.encoder_input, fc.conv);
    const int last_c = cfg.conv_channels[2];
    const int last_n = fc.conv.size.back();
    const double inv_area = 1.0 / (last_n * last_n);
    fc.pooled.assign(last_c, 0.0);
    const auto& last = fc.conv.act.back();
    for (int c = 0; c < last_c; ++c) {
        double s = 0.0;
        for (int i = 0; i < last_n * last_n; ++i)
            s += last[static_cast<size_t>(c) * last_n * last_n + i];
        fc.pooled[c] = s * inv_area;
    }
    fc.img_feat.assign(cfg.image_feature, 0.0);
    for (int f = 0; f < cfg.image_feature; ++f) fc.img_feat[f] = p[L.proj_b + f];
    matvec_add(p + L.proj_w, fc.pooled.data(), fc.img_feat.data(), cfg.image_feature,
               last_c);

    // fusion head
    fc.concat.clear();
    fc.concat.insert(fc.concat.end(), fc.text.h_final.begin(), fc.text.h_final.end());
    fc.concat.insert(fc.concat.end(), fc.pos.h_final.begin(), fc.pos.h_final.end());
    fc.concat.insert(fc.concat.end(), fc.img_feat.begin(), fc.img_feat.end());
    double logit = p[L.head_b];
    for (int i = 0; i < L.concat_dim; ++i) logit += p[L.head_w + i] * fc.concat[i];
    fc.logit = logit;
    fc.prob = sigmoid(logit);
}

void backward_cached(const FusionParams& params, const Layout& L,
                     const ForwardCache& fc, double dlogit, double* gp) {
    const auto& cfg = params.config;
    const double* p = params.flat.data();

    // head
    gp[L.head_b] += dlogit;
    std::vector<double> dconcat(L.concat_dim);
    for (int i = 0; i < L.concat_dim; ++i) {
        gp[L.head_w + i] += dlogit * fc.concat[i];
        dconcat[i] = dlogit * p[L.head_w + i];
    }
    std::vector<double> dht(dconcat.begin(), dconcat.begin() + cfg.text_hidden);
    std::vector<double> dhp(dconcat.begin() + cfg.text_hidden,
                            dconcat.begin() + cfg.text_hidden + cfg.pos_hidden);
    std::vector<double> dv(dconcat.begin() + cfg.text_hidden + cfg.pos_hidden,
                           dconcat.end());

    // image projection + GAP + conv stack
    const int last_c = cfg.conv_channels[2];
    const int last_n = fc.conv.size.back();
    outer_add(gp + L.proj_w, dv.data(), fc.pooled.data(), cfg.image_feature, last_c);
    for (int f = 0; f < cfg.image_feature; ++f) gp[L.proj_b + f] += dv[f];
    std::vector<double> dpooled(last_c, 0.0);
    matvec_t_add(p + L.proj_w, dv.data(), dpooled.data(), cfg.image_feature, last_c);
    std::vector<double> dmap(static_cast<size_t>(last_c) * last_n * last_n);
    const double inv_area = 1.0 / (last_n * last_n);
    for (int c = 0; c < last_c; ++c)
        for (int i = 0; i < last_n * last_n; ++i)
            dmap[static_cast<size_t>(c) * last_n * last_n + i] = dpooled[c] * inv_area;
    conv_backward(p, L, fc.conv, std::move(dmap), gp);

    // recurrent branches
    std::vector<std::vector<double>> dxs;
    gru_backward(p, L.text, fc.text, dht, gp, &dxs);
    for (size_t t = 0; t < fc.chars.size(); ++t) {
        double* erow =
            gp + L.embed + static_cast<size_t>(fc.chars[t]) * cfg.char_embed_dim;
        for (int i = 0; i < cfg.char_embed_dim; ++i) erow[i] += dxs[t][i];
    }
    gru_backward(p, L.pos, fc.pos, dhp, gp, nullptr);
}

constexpr double kProbClamp = 1e-7;

}  // namespace

std::vector<PositionalFeature> encode_positions(const std::vector<OcrToken>& tokens) {
    std::vector<PositionalFeature> out;
    out.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        const double W = t.image_w, H = t.image_h;
        if (W <= 0 || H <= 0 || t.w <= 0 || t.h <= 0 || t.x < 0 || t.y < 0 ||
            t.x + t.w > W || t.y + t.h > H)
            throw ContractError("invalid token box at index " + std::to_string(i) +
                                " (\"" + t.text + "\")");
        PositionalFeature f;
        f[0] = t.x / W;
        f[1] = t.y / H;
        f[2] = t.w / W;
        f[3] = t.h / H;
        f[4] = (t.x + t.w / 2) / W;
        f[5] = (t.y + t.h / 2) / H;
        f[6] = std::clamp(t.w / t.h, 0.05, 20.0);
        f[7] = (t.w * t.h) / (W * H);
        out.push_back(f);
    }
    return out;
}

size_t param_count(const FusionConfig& config) { return make_layout(config).total; }

FusionParams init_params(const FusionConfig& config, uint64_t seed) {
    const Layout L = make_layout(config);
    FusionParams params;
    params.config = config;
    params.flat.assign(L.total, 0.0);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](double* base, size_t n, int fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
        for (size_t i = 0; i < n; ++i) {
            const double u = ((rng() >> 11) * (1.0 / 9007199254740992.0)) * 2.0 - 1.0;
            base[i] = u * scale;
        }
    };
    double* p = params.flat.data();
    fill(p + L.embed, static_cast<size_t>(kCharTableSize) * config.char_embed_dim, 1);
    for (const GruLayout* g : {&L.text, &L.pos}) {
        fill(p + g->Wz, static_cast<size_t>(g->hid) * g->in, g->in);
        fill(p + g->Uz, static_cast<size_t>(g->hid) * g->hid, g->hid);
        fill(p + g->Wr, static_cast<size_t>(g->hid) * g->in, g->in);
        fill(p + g->Ur, static_cast<size_t>(g->hid) * g->hid, g->hid);
        fill(p + g->Wh, static_cast<size_t>(g->hid) * g->in, g->in);
        fill(p + g->Uh, static_cast<size_t>(g->hid) * g->hid, g->hid);
        // biases stay zero
    }
    for (int l = 0; l < 3; ++l)
        fill(p + L.conv[l].w, static_cast<size_t>(L.conv[l].cout) * L.conv[l].cin * 9,
             L.conv[l].cin * 9);
    fill(p + L.proj_w,
         static_cast<size_t>(config.image_feature) * config.conv_channels[2],
         config.conv_channels[2]);
    fill(p + L.head_w, L.concat_dim, L.concat_dim);
    return params;
}

double forward(const FusionParams& params, const TrainRecord& record) {
    const Layout L = make_layout(params.config);
    ForwardCache fc;
    forward_cached(params, L, record, fc);
    return fc.prob;
}

std::pair<double, std::vector<double>> loss_and_grad(
    const FusionParams& params, const std::vector<TrainRecord>& batch) {
    if (batch.empty()) throw ContractError("loss_and_grad: empty batch");
    const Layout L = make_layout(params.config);
    std::vector<double> grad(L.total, 0.0);
    double loss = 0.0;
    const double inv_n = 1.0 / batch.size();
    for (const auto& rec : batch) {
        ForwardCache fc;
        forward_cached(params, L, rec, fc);
        const double y = rec.label == BinaryLabel::positive ? 1.0 : 0.0;
        const double pc = std::clamp(fc.prob, kProbClamp, 1.0 - kProbClamp);
        loss += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc)) * inv_n;
        const double dlogit = (fc.prob - y) * inv_n;
        backward_cached(params, L, fc, dlogit, grad.data());
    }
    return {loss, std::move(grad)};
}

TrainResult train(const std::vector<TrainRecord>& records,
                  const FusionConfig& model_config, const TrainConfig& config) {
    if (records.size() < 2) throw ContractError("train: need at least 2 records");
    const bool has_pos = std::any_of(records.begin(), records.end(), [](const auto& r) {
        return r.label == BinaryLabel::positive;
    });
    const bool has_neg = std::any_of(records.begin(), records.end(), [](const auto& r) {
        return r.label == BinaryLabel::negative;
    });
    if (!has_pos || !has_neg)
        throw ContractError("train: both labels must be represented");
    if (config.batch_size < 1) throw ContractError("train: batch_size must be >= 1");

    TrainResult result;
    result.params = init_params(model_config, config.seed);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng() % i]);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            std::vector<TrainRecord> batch;
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            for (size_t i = start; i < end; ++i) batch.push_back(records[order[i]]);
            auto [loss, grad] = loss_and_grad(result.params, batch);
            (void)loss;
            for (size_t i = 0; i < grad.size(); ++i)
                result.params.flat[i] -= config.learning_rate * grad[i];
        }
        auto [epoch_loss, grad] = loss_and_grad(result.params, records);
        (void)grad;
        int correct = 0;
        for (const auto& rec : records) {
            const double prob = forward(result.params, rec);
            const BinaryLabel pred =
                prob >= 0.5 ? BinaryLabel::positive : BinaryLabel::negative;
            if (pred == rec.label) ++correct;
        }
        result.trace.push_back(
            {epoch_loss, static_cast<double>(correct) / records.size()});
    }
    return result;
}

OverlayVerdict detect_fusion(const FusionParams& params, const TrainRecord& record) {
    const double prob = forward(params, record);
    OverlayVerdict v;
    v.strategy = Strategy::fusion;
    if (prob >= 0.5) {
        v.label = BinaryLabel::positive;
        v.confidence = prob;
    } else {
        v.label = BinaryLabel::negative;
        v.confidence = 1.0 - prob;
    }
    return v;
}

TrainRecord load_record(const ImageSample& sample) {
    TrainRecord rec;
    rec.image = read_pgm(sample.image_path);
    rec.tokens = load_sidecar(sidecar_path(sample.image_path));
    for (auto& t : rec.tokens) {
        if (t.image_w <= 0) t.image_w = rec.image.width;
        if (t.image_h <= 0) t.image_h = rec.image.height;
    }
    rec.label = category_to_binary(sample.category);
    return rec;
}

void save_checkpoint(const FusionParams& params, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    const auto& c = params.config;
    j["config"] = {{"char_embed_dim", c.char_embed_dim},
                   {"text_hidden", c.text_hidden},
                   {"pos_hidden", c.pos_hidden},
                   {"image_feature", c.image_feature},
                   {"conv_channels", c.conv_channels},
                   {"encoder_input", c.encoder_input},
                   {"max_tokens", c.max_tokens},
                   {"max_chars", c.max_chars}};
    j["params"] = params.flat;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump() << "\n";
}

FusionParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("invalid checkpoint: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw SchemaError("unsupported checkpoint version");
    FusionParams params;
    const auto& c = j.at("config");
    params.config.char_embed_dim = c.at("char_embed_dim").get<int>();
    params.config.text_hidden = c.at("text_hidden").get<int>();
    params.config.pos_hidden = c.at("pos_hidden").get<int>();
    params.config.image_feature = c.at("image_feature").get<int>();
    params.config.conv_channels = c.at("conv_channels").get<std::array<int, 3>>();
    params.config.encoder_input = c.at("encoder_input").get<int>();
    params.config.max_tokens = c.at("max_tokens").get<int>();
    params.config.max_chars = c.at("max_chars").get<int>();
    params.flat = j.at("params").get<std::vector<double>>();
    if (params.flat.size() != param_count(params.config))
        throw SchemaError("checkpoint parameter count does not match its config");
    return params;
}

}  // namespace overlay
