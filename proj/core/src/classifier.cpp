#include "advqa/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "advqa/error.hpp"
#include "advqa/rng.hpp"
#include "binary_io.hpp"

namespace advqa {
namespace {

// y += M x, M is rows x cols row-major.
void gemv_add(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = m + i * cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            acc += row[j] * x[j];
        }
        y[i] += acc;
    }
}

// x += M^T y
void gemv_t_add(const double* m, std::size_t rows, std::size_t cols, const double* y, double* x) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = m + i * cols;
        const double yi = y[i];
        for (std::size_t j = 0; j < cols; ++j) {
            x[j] += row[j] * yi;
        }
    }
}

// G += a b^T
void outer_add(double* g, std::size_t rows, std::size_t cols, const double* a, const double* b) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = g + i * cols;
        const double ai = a[i];
        for (std::size_t j = 0; j < cols; ++j) {
            row[j] += ai * b[j];
        }
    }
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct GruStep {
    std::size_t input;  // row of the input matrix consumed at this step
    std::vector<double> h_prev;
    std::vector<double> z;
    std::vector<double> r;
    std::vector<double> c;
};

struct GruTrace {
    std::vector<GruStep> steps;
    std::vector<double> h;
};

struct GruParams {
    const double* w;  // 3H x d, gate blocks [z; r; n]
    const double* u;  // 3H x H
    const double* b;  // 3H
};

GruTrace run_gru(const GruParams& p, std::size_t hidden, const InputMatrix& x, bool reverse) {
    const std::size_t d = x.dim;
    const std::size_t n = x.rows;
    GruTrace trace;
    trace.h.assign(hidden, 0.0);
    trace.steps.reserve(n);
    std::vector<double> az(hidden), ar(hidden), an(hidden), rh(hidden);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t t = reverse ? n - 1 - k : k;
        const double* xt = x.values.data() + t * d;
        GruStep step{t, trace.h, std::vector<double>(hidden), std::vector<double>(hidden), std::vector<double>(hidden)};

        std::copy(p.b, p.b + hidden, az.begin());
        std::copy(p.b + hidden, p.b + 2 * hidden, ar.begin());
        std::copy(p.b + 2 * hidden, p.b + 3 * hidden, an.begin());
        gemv_add(p.w, hidden, d, xt, az.data());
        gemv_add(p.w + hidden * d, hidden, d, xt, ar.data());
        gemv_add(p.w + 2 * hidden * d, hidden, d, xt, an.data());
        gemv_add(p.u, hidden, hidden, step.h_prev.data(), az.data());
        gemv_add(p.u + hidden * hidden, hidden, hidden, step.h_prev.data(), ar.data());
        for (std::size_t i = 0; i < hidden; ++i) {
            step.z[i] = sigmoid(az[i]);
            step.r[i] = sigmoid(ar[i]);
            rh[i] = step.r[i] * step.h_prev[i];
        }
        gemv_add(p.u + 2 * hidden * hidden, hidden, hidden, rh.data(), an.data());
        for (std::size_t i = 0; i < hidden; ++i) {
            step.c[i] = std::tanh(an[i]);
            trace.h[i] = (1.0 - step.z[i]) * step.c[i] + step.z[i] * step.h_prev[i];
        }
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

// Backpropagates dh (gradient w.r.t. the final state) through one direction.
void backward_gru(const GruParams& p, std::size_t hidden, const InputMatrix& x, const GruTrace& trace,
                  std::vector<double> dh, double* gw, double* gu, double* gb, double* gx) {
    const std::size_t d = x.dim;
    const std::size_t hh = hidden * hidden;
    std::vector<double> daz(hidden), dar(hidden), dan(hidden), rh(hidden), drh(hidden), dh_prev(hidden);
    for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it) {
        const GruStep& s = *it;
        const double* xt = x.values.data() + s.input * d;
        double* dxt = gx + s.input * d;
        for (std::size_t i = 0; i < hidden; ++i) {
            const double dz = dh[i] * (s.h_prev[i] - s.c[i]);
            const double dc = dh[i] * (1.0 - s.z[i]);
            dh_prev[i] = dh[i] * s.z[i];
            dan[i] = dc * (1.0 - s.c[i] * s.c[i]);
            daz[i] = dz * s.z[i] * (1.0 - s.z[i]);
            rh[i] = s.r[i] * s.h_prev[i];
        }
        std::fill(drh.begin(), drh.end(), 0.0);
        gemv_t_add(p.u + 2 * hh, hidden, hidden, dan.data(), drh.data());
        for (std::size_t i = 0; i < hidden; ++i) {
            const double dr = drh[i] * s.h_prev[i];
            dh_prev[i] += drh[i] * s.r[i];
            dar[i] = dr * s.r[i] * (1.0 - s.r[i]);
        }
        const double* gates[3] = {daz.data(), dar.data(), dan.data()};
        for (std::size_t g = 0; g < 3; ++g) {
            outer_add(gw + g * hidden * d, hidden, d, gates[g], xt);
            gemv_t_add(p.w + g * hidden * d, hidden, d, gates[g], dxt);
            for (std::size_t i = 0; i < hidden; ++i) {
                gb[g * hidden + i] += gates[g][i];
            }
        }
        outer_add(gu, hidden, hidden, daz.data(), s.h_prev.data());
        outer_add(gu + hh, hidden, hidden, dar.data(), s.h_prev.data());
        outer_add(gu + 2 * hh, hidden, hidden, dan.data(), rh.data());
        gemv_t_add(p.u, hidden, hidden, daz.data(), dh_prev.data());
        gemv_t_add(p.u + hh, hidden, hidden, dar.data(), dh_prev.data());
        dh.swap(dh_prev);
    }
}

void check_inputs(const ModelShape& shape, const InputMatrix& x) {
    if (x.rows == 0) {
        throw Error("empty_question", "classifier input has no tokens");
    }
    if (x.dim != shape.dim || x.values.size() != x.rows * x.dim) {
        throw Error("dimension_mismatch", "input dimension " + std::to_string(x.dim) + " does not match model dimension " +
                                              std::to_string(shape.dim));
    }
}

} // namespace

std::string_view to_string(Arch a) {
    switch (a) {
    case Arch::DAN: return "dan";
    case Arch::GRU: return "gru";
    case Arch::LinearBow: return "linear";
    }
    return "?";
}

std::optional<Arch> parse_arch(std::string_view s) {
    if (s == "dan" || s == "DAN") return Arch::DAN;
    if (s == "gru" || s == "GRU" || s == "rnn" || s == "RNN") return Arch::GRU;
    if (s == "linear" || s == "LinearBow") return Arch::LinearBow;
    return std::nullopt;
}

InputMatrix embed_input(const EmbeddingTable& emb, const TokenSequence& tokens) {
    return {tokens.size(), emb.dim(), emb.embed(tokens)};
}

std::size_t Classifier::parameter_count(const ModelShape& s) {
    const std::size_t d = s.dim;
    const std::size_t h = s.hidden;
    const std::size_t c = s.num_classes;
    switch (s.arch) {
    case Arch::DAN:
        return h * d + h + c * h + c;
    case Arch::GRU: {
        const std::size_t dirs = s.bidirectional ? 2 : 1;
        return dirs * (3 * h * d + 3 * h * h + 3 * h) + c * dirs * h + c;
    }
    case Arch::LinearBow:
        return c * d + c;
    }
    return 0;
}

std::size_t Classifier::feature_width() const noexcept {
    switch (shape_.arch) {
    case Arch::DAN: return shape_.hidden;
    case Arch::GRU: return (shape_.bidirectional ? 2 : 1) * shape_.hidden;
    case Arch::LinearBow: return shape_.dim;
    }
    return 0;
}

Classifier::Classifier(const ModelShape& shape, std::vector<AnswerLabel> labels, std::uint64_t seed)
    : shape_(shape), seed_(seed), labels_(std::move(labels)) {
    if (shape.dim == 0 || shape.num_classes == 0 || (shape.arch != Arch::LinearBow && shape.hidden == 0)) {
        throw Error("invalid_argument", "model dimensions must be positive");
    }
    if (labels_.size() != shape.num_classes) {
        throw Error("invalid_argument", "label count " + std::to_string(labels_.size()) + " != num_classes " +
                                            std::to_string(shape.num_classes));
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        labels_[i].class_index = i;
    }
    const std::size_t d = shape.dim;
    const std::size_t h = shape.hidden;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        segments_.push_back({std::move(name), offset, rows, cols});
        offset += rows * cols;
    };
    switch (shape.arch) {
    case Arch::DAN:
        add("hidden.W", h, d);
        add("hidden.b", h, 1);
        break;
    case Arch::GRU:
        add("fwd.W", 3 * h, d);
        add("fwd.U", 3 * h, h);
        add("fwd.b", 3 * h, 1);
        if (shape.bidirectional) {
            add("bwd.W", 3 * h, d);
            add("bwd.U", 3 * h, h);
            add("bwd.b", 3 * h, 1);
        }
        break;
    case Arch::LinearBow:
        break;
    }
    add("out.W", shape.num_classes, feature_width());
    add("out.b", shape.num_classes, 1);
    params_.assign(offset, 0.0);
}

Classifier Classifier::create(const ModelShape& shape, std::vector<AnswerLabel> labels, std::uint64_t seed) {
    Classifier clf(shape, std::move(labels), seed);
    Rng rng(seed);
    for (const auto& seg : clf.segments_) {
        if (seg.cols == 1) {
            continue;  // biases start at zero
        }
        // Recurrent and input matrices stack three gate blocks; the fan-out
        // of each block is the hidden size.
        const bool stacked = shape.arch == Arch::GRU && seg.name.find("out.") != 0;
        const double fan_out = static_cast<double>(stacked ? seg.rows / 3 : seg.rows);
        const double limit = std::sqrt(6.0 / (static_cast<double>(seg.cols) + fan_out));
        for (std::size_t i = 0; i < seg.size(); ++i) {
            clf.params_[seg.offset + i] = rng.uniform(-limit, limit);
        }
    }
    return clf;
}

const ParamSegment& Classifier::segment(std::string_view name) const {
    for (const auto& s : segments_) {
        if (s.name == name) {
            return s;
        }
    }
    throw Error("invalid_argument", "no parameter segment named " + std::string(name));
}

std::span<double> Classifier::segment_values(std::string_view name) {
    const auto& s = segment(name);
    return {params_.data() + s.offset, s.size()};
}

std::span<const double> Classifier::segment_values(std::string_view name) const {
    const auto& s = segment(name);
    return {params_.data() + s.offset, s.size()};
}

std::vector<double> Classifier::logits(const InputMatrix& inputs) const { return logits(inputs, {}); }

std::vector<double> Classifier::logits(const InputMatrix& x, std::span<const double> mask) const {
    check_inputs(shape_, x);
    const std::size_t d = shape_.dim;
    const std::size_t h = shape_.hidden;
    const std::size_t width = feature_width();
    std::vector<double> feat(width, 0.0);

    switch (shape_.arch) {
    case Arch::DAN: {
        std::vector<double> avg(d, 0.0);
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t j = 0; j < d; ++j) {
                avg[j] += x.values[t * d + j];
            }
        }
        for (auto& v : avg) {
            v /= static_cast<double>(x.rows);
        }
        const auto& w = segment("hidden.W");
        const auto& b = segment("hidden.b");
        std::copy_n(params_.data() + b.offset, h, feat.begin());
        gemv_add(params_.data() + w.offset, h, d, avg.data(), feat.data());
        for (auto& v : feat) {
            v = std::tanh(v);
        }
        break;
    }
    case Arch::GRU: {
        const auto run = [&](const char* prefix, bool reverse) {
            const std::string p(prefix);
            GruParams gp{params_.data() + segment(p + ".W").offset, params_.data() + segment(p + ".U").offset,
                         params_.data() + segment(p + ".b").offset};
            return run_gru(gp, h, x, reverse).h;
        };
        const auto fwd = run("fwd", false);
        std::copy(fwd.begin(), fwd.end(), feat.begin());
        if (shape_.bidirectional) {
            const auto bwd = run("bwd", true);
            std::copy(bwd.begin(), bwd.end(), feat.begin() + static_cast<std::ptrdiff_t>(h));
        }
        break;
    }
    case Arch::LinearBow:
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t j = 0; j < d; ++j) {
                feat[j] += x.values[t * d + j];
            }
        }
        break;
    }

    if (!mask.empty()) {
        for (std::size_t i = 0; i < width; ++i) {
            feat[i] *= mask[i];
        }
    }
    const auto& ow = segment("out.W");
    const auto& ob = segment("out.b");
    std::vector<double> out(params_.begin() + static_cast<std::ptrdiff_t>(ob.offset),
                            params_.begin() + static_cast<std::ptrdiff_t>(ob.offset + ob.size()));
    gemv_add(params_.data() + ow.offset, shape_.num_classes, width, feat.data(), out.data());
    return out;
}

Gradients Classifier::backward(const InputMatrix& x, std::span<const double> upstream,
                               std::span<const double> mask) const {
    check_inputs(shape_, x);
    if (upstream.size() != shape_.num_classes) {
        throw Error("dimension_mismatch", "upstream gradient has wrong length");
    }
    const std::size_t d = shape_.dim;
    const std::size_t h = shape_.hidden;
    const std::size_t c = shape_.num_classes;
    const std::size_t width = feature_width();
    Gradients g{std::vector<double>(params_.size(), 0.0), std::vector<double>(x.values.size(), 0.0)};

    // Recompute the pooled features with the pieces backprop needs.
    std::vector<double> feat(width, 0.0);
    std::vector<double> avg;
    GruTrace fwd_trace;
    GruTrace bwd_trace;
    auto gru_params = [&](const std::string& p) {
        return GruParams{params_.data() + segment(p + ".W").offset, params_.data() + segment(p + ".U").offset,
                         params_.data() + segment(p + ".b").offset};
    };
    switch (shape_.arch) {
    case Arch::DAN: {
        avg.assign(d, 0.0);
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t j = 0; j < d; ++j) {
                avg[j] += x.values[t * d + j];
            }
        }
        for (auto& v : avg) {
            v /= static_cast<double>(x.rows);
        }
        std::copy_n(params_.data() + segment("hidden.b").offset, h, feat.begin());
        gemv_add(params_.data() + segment("hidden.W").offset, h, d, avg.data(), feat.data());
        for (auto& v : feat) {
            v = std::tanh(v);
        }
        break;
    }
    case Arch::GRU:
        fwd_trace = run_gru(gru_params("fwd"), h, x, false);
        std::copy(fwd_trace.h.begin(), fwd_trace.h.end(), feat.begin());
        if (shape_.bidirectional) {
            bwd_trace = run_gru(gru_params("bwd"), h, x, true);
            std::copy(bwd_trace.h.begin(), bwd_trace.h.end(), feat.begin() + static_cast<std::ptrdiff_t>(h));
        }
        break;
    case Arch::LinearBow:
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t j = 0; j < d; ++j) {
                feat[j] += x.values[t * d + j];
            }
        }
        break;
    }

    std::vector<double> masked = feat;
    if (!mask.empty()) {
        for (std::size_t i = 0; i < width; ++i) {
            masked[i] *= mask[i];
        }
    }

    // Output layer.
    const auto& ow = segment("out.W");
    const auto& ob = segment("out.b");
    outer_add(g.params.data() + ow.offset, c, width, upstream.data(), masked.data());
    for (std::size_t i = 0; i < c; ++i) {
        g.params[ob.offset + i] += upstream[i];
    }
    std::vector<double> dfeat(width, 0.0);
    gemv_t_add(params_.data() + ow.offset, c, width, upstream.data(), dfeat.data());
    if (!mask.empty()) {
        for (std::size_t i = 0; i < width; ++i) {
            dfeat[i] *= mask[i];
        }
    }

    switch (shape_.arch) {
    case Arch::DAN: {
        const auto& hw = segment("hidden.W");
        const auto& hb = segment("hidden.b");
        std::vector<double> dpre(h);
        for (std::size_t i = 0; i < h; ++i) {
            dpre[i] = dfeat[i] * (1.0 - feat[i] * feat[i]);
            g.params[hb.offset + i] += dpre[i];
        }
        outer_add(g.params.data() + hw.offset, h, d, dpre.data(), avg.data());
        std::vector<double> davg(d, 0.0);
        gemv_t_add(params_.data() + hw.offset, h, d, dpre.data(), davg.data());
        const double inv_n = 1.0 / static_cast<double>(x.rows);
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t j = 0; j < d; ++j) {
                g.inputs[t * d + j] = davg[j] * inv_n;
            }
        }
        break;
    }
    case Arch::GRU: {
        auto back = [&](const std::string& p, const GruTrace& trace, std::size_t feat_offset) {
            std::vector<double> dh(dfeat.begin() + static_cast<std::ptrdiff_t>(feat_offset),
                                   dfeat.begin() + static_cast<std::ptrdiff_t>(feat_offset + h));
            backward_gru(gru_params(p), h, x, trace, std::move(dh), g.params.data() + segment(p + ".W").offset,
                         g.params.data() + segment(p + ".U").offset, g.params.data() + segment(p + ".b").offset,
                         g.inputs.data());
        };
        back("fwd", fwd_trace, 0);
        if (shape_.bidirectional) {
            back("bwd", bwd_trace, h);
        }
        break;
    }
    case Arch::LinearBow:
        for (std::size_t t = 0; t < x.rows; ++t) {
            std::copy(dfeat.begin(), dfeat.end(), g.inputs.begin() + static_cast<std::ptrdiff_t>(t * d));
        }
        break;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Serialization: magic, u32 version, u32 header length, JSON header, then
// the flat parameter vector as little-endian float64.

namespace {
constexpr char kClassifierMagic[8] = {'A', 'D', 'V', 'Q', 'A', 'C', 'L', 'F'};
} // namespace

void Classifier::write(std::ostream& out) const {
    nlohmann::json header;
    header["arch"] = std::string(to_string(shape_.arch));
    header["bidirectional"] = shape_.bidirectional;
    header["d"] = shape_.dim;
    header["hidden"] = shape_.hidden;
    header["num_classes"] = shape_.num_classes;
    header["seed"] = seed_;
    header["param_count"] = params_.size();
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : labels_) {
        labels.push_back(l.canonical_name);
    }
    header["labels"] = std::move(labels);
    const std::string text = header.dump();
    out.write(kClassifierMagic, sizeof kClassifierMagic);
    binio::put_u32(out, kFormatVersion);
    binio::put_string(out, text);
    for (double v : params_) {
        binio::put_f64(out, v);
    }
}

Classifier Classifier::read(std::istream& in) {
    char magic[sizeof kClassifierMagic];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kClassifierMagic))) {
        throw Error("corrupt_artifact", "not an advqa classifier");
    }
    if (const auto v = binio::get_u32(in); v != kFormatVersion) {
        throw Error("unsupported_version", "unsupported classifier version " + std::to_string(v));
    }
    ModelShape shape;
    std::uint64_t seed = 0;
    std::vector<AnswerLabel> labels;
    std::size_t count = 0;
    try {
        const auto header = nlohmann::json::parse(binio::get_string(in));
        const auto arch = parse_arch(header.at("arch").get<std::string>());
        if (!arch) {
            throw Error("corrupt_artifact", "unknown architecture " + header.at("arch").dump());
        }
        shape.arch = *arch;
        shape.bidirectional = header.value("bidirectional", false);
        shape.dim = header.at("d").get<std::size_t>();
        shape.hidden = header.at("hidden").get<std::size_t>();
        shape.num_classes = header.at("num_classes").get<std::size_t>();
        seed = header.at("seed").get<std::uint64_t>();
        count = header.at("param_count").get<std::size_t>();
        for (const auto& name : header.at("labels")) {
            labels.push_back({name.get<std::string>(), labels.size()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("corrupt_artifact", std::string("invalid classifier header: ") + e.what());
    }
    if (count != parameter_count(shape)) {
        throw Error("corrupt_artifact", "parameter count does not match architecture");
    }
    Classifier clf(shape, std::move(labels), seed);
    for (auto& v : clf.params_) {
        v = binio::get_f64(in);
    }
    return clf;
}

void Classifier::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("io_error", "cannot write classifier " + path.string());
    }
    write(out);
    if (!out) {
        throw Error("io_error", "write failed for " + path.string());
    }
}

Classifier Classifier::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("io_error", "cannot open classifier " + path.string());
    }
    return read(in);
}

// ---------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> z) {
    std::vector<double> p(z.size());
    if (z.empty()) {
        return p;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (auto& v : p) {
        v /= sum;
    }
    return p;
}

std::vector<double> logits(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q) {
    if (q.empty()) {
        throw Error("empty_question", "cannot run a classifier on an empty question");
    }
    return clf.logits(embed_input(emb, q));
}

std::vector<double> forward(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q) {
    return softmax(logits(clf, emb, q));
}

GuessList guess(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q, std::size_t k) {
    const auto p = forward(clf, emb, q);
    return top_k(p, clf.labels(), k);
}

} // namespace advqa
