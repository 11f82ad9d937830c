#include "multibal/model_io.hpp"

#include "multibal/errors.hpp"

#include <array>
#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace multibal {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'B', 'A', 'L', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kMaxDim = 1u << 24;

template<typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> b;
        std::memcpy(b.data(), &v, sizeof(T));
        std::reverse(b.begin(), b.end());
        std::memcpy(&v, b.data(), sizeof(T));
    }
    return v;
}

class Writer {
public:
    explicit Writer(std::ofstream &out) : out_(out) {}
    void u32(std::uint32_t v) { raw(to_little(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        raw(to_little(bits));
    }
private:
    template<typename T>
    void raw(T v) { out_.write(reinterpret_cast<const char *>(&v), sizeof(T)); }
    std::ofstream &out_;
};

class Reader {
public:
    Reader(std::ifstream &in, const std::string &path) : in_(in), path_(path) {}
    std::uint32_t u32() { return to_little(raw<std::uint32_t>()); }
    std::uint32_t dim(const char *what) {
        const std::uint32_t v = u32();
        require(v >= 1 && v <= kMaxDim, ErrorKind::io, path_ + ": implausible " + std::string(what));
        return v;
    }
    double f64() {
        const std::uint64_t bits = to_little(raw<std::uint64_t>());
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
private:
    template<typename T>
    T raw() {
        T v;
        in_.read(reinterpret_cast<char *>(&v), sizeof(T));
        require(in_.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorKind::io, path_ + ": truncated model file");
        return v;
    }
    std::ifstream &in_;
    const std::string &path_;
};

std::uint32_t activation_code(Activation a) {
    switch (a) {
        case Activation::relu: return 0;
        case Activation::tanh: return 1;
        case Activation::identity: return 2;
    }
    return 2;
}

void write_mlp(Writer &w, const MlpParams &m) {
    w.u32(static_cast<std::uint32_t>(m.layers.size()));
    for (const auto &layer : m.layers) {
        w.u32(static_cast<std::uint32_t>(layer.input_dim()));
        w.u32(static_cast<std::uint32_t>(layer.output_dim()));
        w.u32(activation_code(layer.activation));
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) { w.f64(layer.weight.data()[i]); }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) { w.f64(layer.bias(i)); }
    }
}

MlpParams read_mlp(Reader &r, const std::string &path) {
    MlpParams m;
    const std::uint32_t layers = r.dim("layer count");
    for (std::uint32_t l = 0; l < layers; ++l) {
        DenseLayer layer;
        const std::uint32_t in = r.dim("layer input width");
        const std::uint32_t out = r.dim("layer output width");
        const std::uint32_t act = r.u32();
        require(act <= 2, ErrorKind::io, path + ": unknown activation code " + std::to_string(act));
        layer.activation = act == 0 ? Activation::relu : (act == 1 ? Activation::tanh : Activation::identity);
        layer.weight.resize(out, in);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) { layer.weight.data()[i] = r.f64(); }
        layer.bias.resize(out);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) { layer.bias(i) = r.f64(); }
        require(m.layers.empty() || m.layers.back().output_dim() == static_cast<int>(in), ErrorKind::io,
                path + ": consecutive layer widths do not match");
        m.layers.push_back(std::move(layer));
    }
    return m;
}

}  // namespace

void save_model(const ModelParams &theta, const std::string &path) {
    theta.check();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot write model file '" + path + "'");
    out.write(kMagic.data(), kMagic.size());
    Writer w(out);
    w.u32(kModelFileVersion);
    w.u32(theta.head_mode == HeadMode::multi_head ? 0u : 1u);
    w.u32(static_cast<std::uint32_t>(theta.table.rows()));
    w.u32(static_cast<std::uint32_t>(theta.table.cols()));
    w.u32(static_cast<std::uint32_t>(1 + theta.heads.size()));
    write_mlp(w, theta.phi);
    for (const auto &h : theta.heads) { write_mlp(w, h); }
    for (Eigen::Index i = 0; i < theta.table.size(); ++i) { w.f64(theta.table.data()[i]); }
    out.flush();
    require(out.good(), ErrorKind::io, "failed writing model file '" + path + "'");
}

ModelParams load_model(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::io, "cannot open model file '" + path + "'");
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    require(in.gcount() == 8 && magic == kMagic, ErrorKind::io, path + ": not a model file (bad magic)");
    Reader r(in, path);
    const std::uint32_t version = r.u32();
    require(version == kModelFileVersion, ErrorKind::io,
            path + ": unsupported layout version " + std::to_string(version));
    const std::uint32_t mode = r.u32();
    require(mode <= 1, ErrorKind::io, path + ": unknown head mode code");
    ModelParams theta;
    theta.head_mode = mode == 0 ? HeadMode::multi_head : HeadMode::embed_conditioned;
    const std::uint32_t arms = r.dim("K");
    const std::uint32_t emb = r.dim("embedding width");
    const std::uint32_t nets = r.dim("network count");
    theta.phi = read_mlp(r, path);
    for (std::uint32_t k = 1; k < nets; ++k) { theta.heads.push_back(read_mlp(r, path)); }
    theta.table.resize(arms, emb);
    for (Eigen::Index i = 0; i < theta.table.size(); ++i) { theta.table.data()[i] = r.f64(); }
    in.peek();
    require(in.eof(), ErrorKind::io, path + ": trailing bytes after the embedding table");
    try {
        theta.check();
    } catch (const Error &e) {
        throw Error(ErrorKind::io, path + ": " + e.what());
    }
    return theta;
}

}  // namespace multibal
