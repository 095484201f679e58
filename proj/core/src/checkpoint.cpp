#include "arbiter/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "arbiter/errors.hpp"

namespace arbiter::io {

namespace {

constexpr char kMagic[4] = {'A', 'R', 'B', 'C'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
}
void write_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
}
void write_string(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_array_f32(std::ofstream& out, const nn::TensorData& t) {
    write_u32(out, static_cast<std::uint32_t>(t.rows));
    write_u32(out, static_cast<std::uint32_t>(t.cols));
    std::vector<float> f32(t.v.size());
    for (std::size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(t.v[i]);
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * 4));
}

struct Reader {
    std::ifstream in;

    explicit Reader(const std::string& path) : in(path, std::ios::binary) {
        if (!in) throw IoError("checkpoint: cannot open " + path);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        check();
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        check();
        return v;
    }
    double f64() {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        check();
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        in.read(s.data(), n);
        check();
        return s;
    }
    nn::TensorData array_f32() {
        const auto rows = static_cast<long>(u32());
        const auto cols = static_cast<long>(u32());
        nn::TensorData t(rows, cols);
        std::vector<float> f32(t.v.size());
        in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(f32.size() * 4));
        check();
        for (std::size_t i = 0; i < f32.size(); ++i) t.v[i] = static_cast<double>(f32[i]);
        return t;
    }
    void check() const {
        if (!in) throw IoError("checkpoint: truncated file");
    }
};

CheckpointMeta read_header(Reader& r) {
    char magic[4];
    r.in.read(magic, 4);
    r.check();
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("checkpoint: bad magic");
    CheckpointMeta meta;
    meta.version = r.u32();
    if (meta.version != 1) throw IoError("checkpoint: unsupported version");
    meta.config_json = r.str();
    meta.step = r.u64();
    meta.val_loss = r.f64();
    meta.has_optimizer = r.u32() != 0;
    meta.optimizer_steps = r.u64();
    return meta;
}

} // namespace

void save_checkpoint(const std::string& path, const nn::ParamStore& store,
                     const CheckpointMeta& meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot write " + path);
    out.write(kMagic, 4);
    write_u32(out, meta.version);
    write_string(out, meta.config_json);
    write_u64(out, meta.step);
    write_f64(out, meta.val_loss);
    write_u32(out, meta.has_optimizer ? 1 : 0);
    write_u64(out, meta.optimizer_steps);

    write_u32(out, static_cast<std::uint32_t>(store.params().size()));
    for (const auto& p : store.params()) {
        write_string(out, p->name);
        write_array_f32(out, p->value);
        if (meta.has_optimizer) {
            write_array_f32(out, p->adam_m);
            write_array_f32(out, p->adam_v);
        }
    }
    write_u32(out, static_cast<std::uint32_t>(store.buffers().size()));
    for (const auto& b : store.buffers()) {
        write_string(out, b->name);
        write_array_f32(out, b->value);
    }
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, nn::ParamStore& store) {
    Reader r(path);
    const CheckpointMeta meta = read_header(r);

    const std::uint32_t n_params = r.u32();
    if (n_params != store.params().size()) {
        throw IoError("checkpoint: parameter count mismatch in " + path);
    }
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::string name = r.str();
        nn::TensorData value = r.array_f32();
        nn::Param* p = store.find(name);
        if (!p) throw IoError("checkpoint: unknown parameter " + name);
        if (!p->value.same_shape(value)) throw IoError("checkpoint: shape mismatch for " + name);
        p->value = std::move(value);
        if (meta.has_optimizer) {
            p->adam_m = r.array_f32();
            p->adam_v = r.array_f32();
        }
    }
    const std::uint32_t n_buffers = r.u32();
    if (n_buffers != store.buffers().size()) {
        throw IoError("checkpoint: buffer count mismatch in " + path);
    }
    for (std::uint32_t i = 0; i < n_buffers; ++i) {
        const std::string name = r.str();
        nn::TensorData value = r.array_f32();
        nn::BufferTensor* b = store.find_buffer(name);
        if (!b) throw IoError("checkpoint: unknown buffer " + name);
        if (!b->value.same_shape(value)) throw IoError("checkpoint: buffer shape mismatch for " + name);
        b->value = std::move(value);
    }
    return meta;
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
    Reader r(path);
    return read_header(r);
}

std::size_t load_checkpoint_prefix(const std::string& path, nn::ParamStore& store,
                                   const std::string& prefix) {
    Reader r(path);
    const CheckpointMeta meta = read_header(r);

    std::size_t copied = 0;
    const std::uint32_t n_params = r.u32();
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::string name = r.str();
        nn::TensorData value = r.array_f32();
        if (meta.has_optimizer) {
            r.array_f32();
            r.array_f32();
        }
        if (name.rfind(prefix, 0) != 0) continue;
        nn::Param* p = store.find(name);
        if (!p) throw IoError("checkpoint: prefix parameter missing in target store: " + name);
        if (!p->value.same_shape(value)) throw IoError("checkpoint: shape mismatch for " + name);
        p->value = std::move(value);
        ++copied;
    }
    const std::uint32_t n_buffers = r.u32();
    for (std::uint32_t i = 0; i < n_buffers; ++i) {
        const std::string name = r.str();
        nn::TensorData value = r.array_f32();
        if (name.rfind(prefix, 0) != 0) continue;
        nn::BufferTensor* b = store.find_buffer(name);
        if (!b) throw IoError("checkpoint: prefix buffer missing in target store: " + name);
        if (!b->value.same_shape(value)) throw IoError("checkpoint: buffer shape mismatch for " + name);
        b->value = std::move(value);
        ++copied;
    }
    return copied;
}

} // namespace arbiter::io
