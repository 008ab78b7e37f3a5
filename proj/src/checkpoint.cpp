#include "fcenet/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace fcenet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint32_t kConfigFields = 5;

class Writer {
   public:
    template <class T>
    void put(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void bytes(const char* p, std::size_t n) { out_.append(p, n); }
    void f32_payload(const Tensor& t) {
        for (double v : t.data()) put(static_cast<float>(v));
    }
    std::string take() { return std::move(out_); }

   private:
    std::string out_;
};

class Reader {
   public:
    explicit Reader(const std::string& b) : b_(b) {}
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, b_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void f32_payload(Tensor& t) {
        need(t.size() * sizeof(float));
        for (double& v : t.data()) v = static_cast<double>(get<float>());
    }
    bool done() const { return pos_ == b_.size(); }

   private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated file");
    }
    const std::string& b_;
    std::size_t pos_ = 0;
};

struct Header {
    ModelConfig config;
};

Header read_header(Reader& r) {
    const std::string magic = r.str(4);
    if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) throw CheckpointError("checkpoint: bad magic bytes");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto n = r.get<std::uint32_t>();
    if (n != kConfigFields) throw CheckpointError("checkpoint: unexpected config block");
    Header h;
    h.config.base_channels = r.get<std::int32_t>();
    h.config.blocks_per_scale = r.get<std::int32_t>();
    h.config.k_filters = r.get<std::int32_t>();
    h.config.patch_height = r.get<std::int32_t>();
    h.config.patch_width = r.get<std::int32_t>();
    return h;
}

struct TensorHeader {
    std::string name;
    std::vector<int> dims;
    std::size_t numel = 1;
};

TensorHeader read_tensor_header(Reader& r) {
    TensorHeader t;
    const auto len = r.get<std::uint32_t>();
    if (len > 4096) throw CheckpointError("checkpoint: implausible tensor name length");
    t.name = r.str(len);
    if (r.get<std::uint8_t>() != kDtypeF32) throw CheckpointError("checkpoint: unsupported dtype for " + t.name);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CheckpointError("checkpoint: implausible rank for " + t.name);
    for (std::uint32_t i = 0; i < rank; ++i) {
        const auto d = r.get<std::uint32_t>();
        t.dims.push_back(static_cast<int>(d));
        t.numel *= d;
    }
    return t;
}

}  // namespace

std::string serialize_checkpoint(const ModelWeights& weights, const OptimState* optim) {
    Writer w;
    w.bytes(kCheckpointMagic, 4);
    w.put(kCheckpointVersion);
    const ModelConfig& c = weights.config();
    w.put(kConfigFields);
    for (int v : {c.base_channels, c.blocks_per_scale, c.k_filters, c.patch_height, c.patch_width}) {
        w.put(static_cast<std::int32_t>(v));
    }
    const ParamStore& params = weights.params();
    w.put(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.put(static_cast<std::uint32_t>(p->name.size()));
        w.bytes(p->name.data(), p->name.size());
        w.put(kDtypeF32);
        w.put(static_cast<std::uint32_t>(p->dims.size()));
        for (int d : p->dims) w.put(static_cast<std::uint32_t>(d));
        w.f32_payload(p->value);
    }
    const bool has_optim = optim != nullptr && !optim->m.empty();
    w.put(static_cast<std::uint8_t>(has_optim ? 1 : 0));
    if (has_optim) {
        if (optim->m.size() != params.size()) throw CheckpointError("checkpoint: optimizer state does not match model");
        w.put(static_cast<std::int64_t>(optim->step));
        w.put(static_cast<std::int64_t>(optim->total_steps));
        for (double v : {optim->lr_init, optim->lr_min, optim->beta1, optim->beta2, optim->adam_eps}) w.put(v);
        for (const auto& m : optim->m) w.f32_payload(m);
        for (const auto& v : optim->v) w.f32_payload(v);
    }
    return w.take();
}

LoadedCheckpoint deserialize_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    const Header h = read_header(r);
    LoadedCheckpoint out{[&] {
        try {
            return ModelWeights(h.config);
        } catch (const std::invalid_argument& e) {
            throw CheckpointError(std::string("checkpoint: invalid model config: ") + e.what());
        }
    }(), std::nullopt};
    ParamStore& params = out.weights.params();
    const auto n = r.get<std::uint32_t>();
    if (n != params.size()) {
        throw CheckpointError("checkpoint: holds " + std::to_string(n) + " tensors, model expects " +
                              std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        TensorHeader t = read_tensor_header(r);
        if (t.name != p.name || t.dims != p.dims) {
            throw CheckpointError("checkpoint: tensor " + std::to_string(i) + " is '" + t.name +
                                  "', expected '" + p.name + "' with matching dims");
        }
        r.f32_payload(p.value);
        if (!p.value.all_finite()) throw CheckpointError("checkpoint: non-finite values in " + p.name);
    }
    const auto has_optim = r.get<std::uint8_t>();
    if (has_optim > 1) throw CheckpointError("checkpoint: bad optimizer flag");
    if (has_optim == 1) {
        OptimState st;
        st.step = r.get<std::int64_t>();
        st.total_steps = r.get<std::int64_t>();
        st.lr_init = r.get<double>();
        st.lr_min = r.get<double>();
        st.beta1 = r.get<double>();
        st.beta2 = r.get<double>();
        st.adam_eps = r.get<double>();
        for (auto* moments : {&st.m, &st.v}) {
            for (const auto& p : params) {
                Tensor t = Tensor::zeros_like(p->value);
                r.f32_payload(t);
                moments->push_back(std::move(t));
            }
        }
        try {
            st.validate();
        } catch (const std::invalid_argument& e) {
            throw CheckpointError(std::string("checkpoint: ") + e.what());
        }
        out.optim = std::move(st);
    }
    if (!r.done()) throw CheckpointError("checkpoint: trailing bytes");
    return out;
}

void write_checkpoint(const std::string& path, const ModelWeights& weights, const OptimState* optim) {
    write_file_atomic(path, serialize_checkpoint(weights, optim));
}

LoadedCheckpoint read_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

std::vector<StoredTensor> list_checkpoint_tensors(const std::string& bytes) {
    Reader r(bytes);
    read_header(r);
    const auto n = r.get<std::uint32_t>();
    std::vector<StoredTensor> out;
    for (std::uint32_t i = 0; i < n; ++i) {
        TensorHeader t = read_tensor_header(r);
        r.str(t.numel * sizeof(float));
        out.push_back({t.name, t.dims, t.numel});
    }
    return out;
}

}  // namespace fcenet
