#include "enhope/model_file.hpp"

#include "enhope/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace enhope {

namespace {

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(const double* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) f64(data[i]);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    void need(std::size_t n, const char* what) const {
        if (in_.size() - pos_ < n) {
            throw Error(ErrorKind::format, std::string("model file truncated reading ") + what + " at byte offset " +
                                               std::to_string(pos_));
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    void f64s(double* out, Eigen::Index n, const char* what) {
        need(static_cast<std::size_t>(n) * 8, what);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = f64(what);
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ == in_.size(); }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'E', 'N', 'H', 'P'};

// Guards against absurd header values before allocating.
constexpr std::uint32_t kMaxDim = 1u << 24;

} // namespace

std::vector<std::uint8_t> encode_model(const ModelFile& file) {
    const auto& model = file.model;
    model.validate();
    const auto H = static_cast<std::uint32_t>(model.input_dim());
    const auto z = static_cast<std::uint32_t>(file.exemplars.size());
    if (file.exemplars.vectors.rows() != static_cast<Eigen::Index>(z) ||
        (z > 0 && file.exemplars.vectors.cols() != static_cast<Eigen::Index>(H))) {
        throw Error(ErrorKind::dimension, "exemplar matrix does not match the model");
    }

    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kModelFormatVersion);
    w.u32(static_cast<std::uint32_t>(model.variant()));
    w.u32(H);
    w.u32(static_cast<std::uint32_t>(model.output_dim()));
    if (model.variant() == Variant::high_order) {
        const auto& p = model.high_order();
        w.u32(static_cast<std::uint32_t>(p.factors()));
        w.u32(static_cast<std::uint32_t>(p.hidden()));
        w.u32(static_cast<std::uint32_t>(p.order));
    } else {
        w.u32(0);
        w.u32(0);
        w.u32(0);
    }
    w.u32(z);
    w.u32(static_cast<std::uint32_t>(file.class_count));
    w.u32(static_cast<std::uint32_t>(model.norm.mode));
    w.f64s(model.norm.offsets.data(), model.norm.offsets.size());
    w.f64s(model.norm.scales.data(), model.norm.scales.size());
    const Vector flat = model.flatten();
    w.f64s(flat.data(), flat.size());
    w.f64s(file.exemplars.vectors.data(), file.exemplars.vectors.size());
    for (int label : file.exemplars.labels) w.u32(static_cast<std::uint32_t>(label));
    w.u64(file.seed);
    w.u32(file.epochs);
    w.u32(file.selected_epoch);
    w.f64(file.final_val_error);
    w.u32(static_cast<std::uint32_t>(file.exemplar_mode));
    for (int c = 0; c < file.class_count; ++c) {
        const std::string name = static_cast<std::size_t>(c) < file.class_names.size()
                                     ? file.class_names[static_cast<std::size_t>(c)]
                                     : std::to_string(c);
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name.data(), name.size());
    }
    return w.take();
}

ModelFile decode_model(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorKind::format, "not a model file (bad magic at byte offset 0)");
    r.str(4, "magic");
    const auto version = r.u32("version");
    if (version != kModelFormatVersion) {
        throw Error(ErrorKind::format, "unsupported model format version " + std::to_string(version));
    }
    const auto variant = r.u32("variant");
    const auto H = r.u32("H"), h = r.u32("h"), F = r.u32("F"), m = r.u32("m"), O = r.u32("O");
    const auto z = r.u32("z"), c = r.u32("c");
    if (variant > 1) throw Error(ErrorKind::format, "unknown model variant " + std::to_string(variant));
    for (auto d : {H, h, F, m, O, z, c}) {
        if (d > kMaxDim) throw Error(ErrorKind::format, "implausible dimension in model header");
    }
    if (H == 0 || h == 0 || c < 2) throw Error(ErrorKind::format, "model header declares empty dimensions");

    ModelFile file;
    file.class_count = static_cast<int>(c);
    auto& model = file.model;
    const auto norm_mode = r.u32("normalization mode");
    if (norm_mode > 2) throw Error(ErrorKind::format, "unknown normalization mode " + std::to_string(norm_mode));
    model.norm.mode = static_cast<NormMode>(norm_mode);
    model.norm.offsets.resize(H);
    model.norm.scales.resize(H);
    r.f64s(model.norm.offsets.data(), H, "normalization offsets");
    r.f64s(model.norm.scales.data(), H, "normalization scales");

    if (variant == static_cast<std::uint32_t>(Variant::high_order)) {
        if (F == 0 || m == 0 || O == 0) throw Error(ErrorKind::format, "high-order model with empty F, m or O");
        HighOrderParams p;
        p.C.resize(H + 1, F);
        p.W.resize(F, m);
        p.b.resize(m);
        p.V.resize(h, m);
        p.order = static_cast<int>(O);
        model.params = std::move(p);
    } else {
        model.params = LinearParams{Matrix(h, H)};
    }
    Vector flat(static_cast<Eigen::Index>(model.param_count()));
    r.f64s(flat.data(), flat.size(), "parameters");
    model.assign(flat);

    file.exemplars.vectors.resize(z, z > 0 ? H : 0);
    r.f64s(file.exemplars.vectors.data(), file.exemplars.vectors.size(), "exemplars");
    for (std::uint32_t j = 0; j < z; ++j) {
        const auto label = r.u32("exemplar labels");
        if (label >= c) throw Error(ErrorKind::format, "exemplar label out of range");
        file.exemplars.labels.push_back(static_cast<int>(label));
    }
    file.seed = r.u64("seed");
    file.epochs = r.u32("epochs");
    file.selected_epoch = r.u32("selected epoch");
    file.final_val_error = r.f64("final validation error");
    const auto mode = r.u32("exemplar mode");
    if (mode > 4) throw Error(ErrorKind::format, "unknown exemplar mode " + std::to_string(mode));
    file.exemplar_mode = static_cast<ExemplarMode>(mode);
    for (std::uint32_t k = 0; k < c; ++k) {
        const auto len = r.u32("class name length");
        file.class_names.push_back(r.str(len, "class name"));
    }
    if (!r.done()) throw Error(ErrorKind::format, "trailing bytes after model at byte offset " + std::to_string(r.pos()));
    model.validate();
    return file;
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
    const auto bytes = encode_model(file);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

} // namespace enhope
