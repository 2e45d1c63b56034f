#include "unirec/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

UNIREC_NAMESPACE_BEGIN

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'R', 'E', 'C', 'K', 'P'};
constexpr std::size_t kHeader = 8 + 4 + 8;
constexpr const char* kNumericPrefix = "frozen.";

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

std::uint32_t crc(std::string_view bytes) {
    uLong c = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks
    const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
    std::size_t left = bytes.size();
    while (left > 0) {
        const uInt n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        c = crc32(c, p, n);
        p += n;
        left -= n;
    }
    return static_cast<std::uint32_t>(c);
}

// Bounds-checked reader over the body.
class Cursor {
  public:
    Cursor(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    template <typename U>
    U next() {
        need(sizeof(U));
        U v = get_le<U>(reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_);
        pos_ += sizeof(U);
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

  private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw DataError(source_ + ": checkpoint body ends early");
    }
    std::string_view bytes_;
    const std::string& source_;
    std::size_t pos_ = 0;
};

json stats_json(const NumericStats& stats) {
    json fields = json::object();
    for (const auto& [name, f] : stats.fields) fields[name] = {{"center", f.center}, {"scale", f.scale}};
    return {{"fields", fields},
            {"time_min", stats.time_span.min_seconds},
            {"time_max", stats.time_span.max_seconds}};
}

NumericStats stats_from_json(const json& j) {
    NumericStats s;
    for (const auto& [name, f] : j.at("fields").items()) {
        s.fields[name] = {f.at("center").get<double>(), f.at("scale").get<double>()};
    }
    s.time_span = {j.at("time_min").get<std::int64_t>(), j.at("time_max").get<std::int64_t>()};
    return s;
}

StoredTensor store(const std::string& name, const Tensor& t) {
    StoredTensor s{name, t.shape(), {}};
    s.values.reserve(t.numel());
    for (Real v : t.data()) s.values.push_back(static_cast<float>(v));
    return s;
}

}  // namespace

const StoredTensor* Checkpoint::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    const json meta = {{"config", json::parse(ckpt.config_json)},
                       {"stage", ckpt.stage},
                       {"schema_hash", ckpt.schema_hash},
                       {"n_slots", ckpt.n_slots},
                       {"numeric_encoder",
                        {{"n_freq", ckpt.numeric_config.n_freq},
                         {"f_min", ckpt.numeric_config.f_min},
                         {"f_max", ckpt.numeric_config.f_max},
                         {"d_out", ckpt.numeric_config.d_out},
                         {"scale_bound", ckpt.numeric_config.scale_bound}}},
                       {"numeric", stats_json(ckpt.stats)}};
    const std::string meta_text = meta.dump();

    std::string body;
    put_le<std::uint32_t>(body, static_cast<std::uint32_t>(meta_text.size()));
    body += meta_text;
    put_le<std::uint32_t>(body, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        if (shape_numel(t.shape) != t.values.size()) {
            throw ShapeError("tensor " + t.name + ": shape " + shape_string(t.shape) + " does not match " +
                             std::to_string(t.values.size()) + " values");
        }
        put_le<std::uint32_t>(body, static_cast<std::uint32_t>(t.name.size()));
        body += t.name;
        put_le<std::uint32_t>(body, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t dim : t.shape) put_le<std::uint64_t>(body, dim);
        for (float v : t.values) put_le<std::uint32_t>(body, std::bit_cast<std::uint32_t>(v));
    }

    std::string out(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, ckpt.version);
    put_le<std::uint64_t>(out, body.size());
    out += body;
    put_le<std::uint32_t>(out, crc(out));
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes, const std::string& source) {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw DataError(source + ": not a checkpoint (bad magic)");
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kHeader + 4) throw DataError(source + ": checksum failure (file truncated in header)");
    const auto body_len = get_le<std::uint64_t>(raw + 12);
    if (bytes.size() - kHeader - 4 != body_len) {
        throw DataError(source + ": checksum failure (expected " + std::to_string(kHeader + body_len + 4) +
                        " bytes, found " + std::to_string(bytes.size()) + "; truncated or padded)");
    }
    const std::size_t covered = bytes.size() - 4;
    if (crc(bytes.substr(0, covered)) != get_le<std::uint32_t>(raw + covered)) {
        throw DataError(source + ": checksum failure (contents corrupted)");
    }
    Checkpoint ckpt;
    ckpt.version = get_le<std::uint32_t>(raw + 8);
    if (ckpt.version != kCheckpointVersion) {
        throw DataError(source + ": checkpoint format version " + std::to_string(ckpt.version) +
                        " is not supported (this build reads version " + std::to_string(kCheckpointVersion) + ")");
    }

    Cursor cur(bytes.substr(kHeader, body_len), source);
    try {
        const json meta = json::parse(cur.take(cur.next<std::uint32_t>()));
        ckpt.config_json = meta.at("config").dump();
        ckpt.stage = meta.at("stage").get<std::string>();
        ckpt.schema_hash = meta.at("schema_hash").get<std::uint64_t>();
        ckpt.n_slots = meta.at("n_slots").get<std::size_t>();
        const json& ne = meta.at("numeric_encoder");
        ckpt.numeric_config.n_freq = ne.at("n_freq").get<std::size_t>();
        ckpt.numeric_config.f_min = ne.at("f_min").get<double>();
        ckpt.numeric_config.f_max = ne.at("f_max").get<double>();
        ckpt.numeric_config.d_out = ne.at("d_out").get<std::size_t>();
        ckpt.numeric_config.scale_bound = ne.at("scale_bound").get<double>();
        ckpt.stats = stats_from_json(meta.at("numeric"));
    } catch (const json::exception& e) {
        throw DataError(source + ": malformed checkpoint metadata: " + e.what());
    }
    const auto n_tensors = cur.next<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        StoredTensor t;
        t.name = std::string(cur.take(cur.next<std::uint32_t>()));
        const auto rank = cur.next<std::uint32_t>();
        for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(static_cast<std::size_t>(cur.next<std::uint64_t>()));
        const std::size_t n = shape_numel(t.shape);
        t.values.reserve(n);
        for (std::size_t k = 0; k < n; ++k) t.values.push_back(std::bit_cast<float>(cur.next<std::uint32_t>()));
        ckpt.tensors.push_back(std::move(t));
    }
    if (!cur.done()) throw DataError(source + ": trailing bytes after the last tensor");
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const std::string bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str(), path);
}

Checkpoint capture_checkpoint(const RunConfig& config, const UniRecModel& model, const FrozenEncoders& frozen,
                              std::uint64_t schema_hash, std::string stage) {
    Checkpoint c;
    c.config_json = config.to_json();
    c.stage = std::move(stage);
    c.schema_hash = schema_hash;
    c.n_slots = model.n_slots();
    c.numeric_config = frozen.numeric->config();
    c.stats = frozen.stats;
    for (const auto& [name, t] : model.parameters()) c.tensors.push_back(store(name, t));
    for (const auto& [name, t] : frozen.numeric->parameters()) c.tensors.push_back(store(kNumericPrefix + name, t));
    return c;
}

void check_compatible(const Checkpoint& ckpt, const RunConfig& config, std::uint64_t schema_hash) {
    const json stored = json::parse(ckpt.config_json);
    const json current = json::parse(config.to_json());
    for (const char* section : {"model", "registry"}) {
        const json& a = stored.at(section);
        const json& b = current.at(section);
        for (const auto& [key, value] : b.items()) {
            if (!a.contains(key) || a.at(key) != value) {
                const std::string name = std::string(section) + "." + key;
                throw ConfigError("checkpoint/config mismatch on \"" + (std::string(section) == "model" ? key : name) +
                                  "\": checkpoint has " + (a.contains(key) ? a.at(key).dump() : "nothing") +
                                  ", config has " + value.dump() + " (" + name + ")");
            }
        }
    }
    if (ckpt.schema_hash != schema_hash) {
        throw ConfigError("checkpoint/config mismatch on \"schema hash\": checkpoint " + std::to_string(ckpt.schema_hash) +
                          ", dataset schema " + std::to_string(schema_hash));
    }
}

void restore_tensors(const Checkpoint& ckpt, const NamedTensors& params, std::string_view prefix) {
    for (const auto& [name, t] : params) {
        const std::string key = std::string(prefix) + name;
        const StoredTensor* s = ckpt.find(key);
        if (!s) throw DataError("checkpoint has no tensor " + key);
        if (s->shape != t.shape()) {
            throw ShapeError("tensor " + key + ": checkpoint shape " + shape_string(s->shape) + ", model shape " +
                             shape_string(t.shape()));
        }
        Tensor target = t;
        auto dst = target.mutable_data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(s->values[i]);
    }
}

std::shared_ptr<NumericEncoder> restore_numeric_encoder(const Checkpoint& ckpt) {
    auto encoder = std::make_shared<NumericEncoder>(ckpt.numeric_config, 0);
    restore_tensors(ckpt, encoder->parameters(), kNumericPrefix);
    encoder->set_trainable(false);
    return encoder;
}

UNIREC_NAMESPACE_END
