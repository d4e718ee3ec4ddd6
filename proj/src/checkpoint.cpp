#include "hemocnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hemocnn/errors.hpp"

namespace hemocnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'B', 'C', 'N'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void pod(T v) {
        bytes(&v, sizeof v);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    void bytes(void* p, std::size_t n, const char* what) {
        if (in_.size() - pos_ < n) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  std::string("checkpoint truncated while reading ") + what);
        }
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T pod(const char* what) {
        T v;
        bytes(&v, sizeof v, what);
        return v;
    }
    bool at_end() const { return pos_ == in_.size(); }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

nlohmann::json meta_to_json(const CheckpointMeta& meta) {
    nlohmann::json j{{"epoch", meta.epoch},
                     {"monitored", meta.monitored},
                     {"class_names", meta.class_names},
                     {"split_ratios", meta.split_ratios},
                     {"split_seed", meta.split_seed},
                     {"eval_on_all", meta.eval_on_all}};
    j["monitored_loss"] = meta.monitored_loss ? nlohmann::json(*meta.monitored_loss) : nlohmann::json(nullptr);
    return j;
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
    CheckpointMeta meta;
    j.at("epoch").get_to(meta.epoch);
    j.at("monitored").get_to(meta.monitored);
    j.at("class_names").get_to(meta.class_names);
    j.at("split_ratios").get_to(meta.split_ratios);
    j.at("split_seed").get_to(meta.split_seed);
    j.at("eval_on_all").get_to(meta.eval_on_all);
    if (!j.at("monitored_loss").is_null()) meta.monitored_loss = j.at("monitored_loss").get<double>();
    return meta;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Network& net, const CheckpointMeta& meta) {
    Writer w;
    w.bytes(kMagic, 4);
    w.pod<std::uint32_t>(kCheckpointVersion);

    const std::string header = nlohmann::json{{"config", net.config()}, {"meta", meta_to_json(meta)}}.dump();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
    w.bytes(header.data(), header.size());

    for (const auto& p : net.parameters()) {
        w.pod<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.pod<std::uint8_t>(static_cast<std::uint8_t>(p.value.rank()));
        for (auto e : p.value.shape()) w.pod<std::uint32_t>(static_cast<std::uint32_t>(e));
        for (auto v : p.value.data()) w.pod<float>(static_cast<float>(v));
    }
    return w.take();
}

LoadedCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    using Kind = CheckpointError::Kind;
    Reader r(bytes);

    char magic[4];
    if (bytes.size() < 4 || (r.bytes(magic, 4, "magic"), std::memcmp(magic, kMagic, 4) != 0)) {
        throw CheckpointError(Kind::BadMagic, "not a checkpoint file (bad magic bytes)");
    }
    const auto version = r.pod<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::UnsupportedVersion, "unsupported checkpoint version " + std::to_string(version) +
                                                            " (expected " + std::to_string(kCheckpointVersion) + ")");
    }

    const auto header_len = r.pod<std::uint32_t>("header length");
    std::string header(header_len, '\0');
    r.bytes(header.data(), header_len, "header");

    NetConfig cfg;
    CheckpointMeta meta;
    try {
        const auto j = nlohmann::json::parse(header);
        cfg = j.at("config").get<NetConfig>();
        meta = meta_from_json(j.at("meta"));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(Kind::Malformed, std::string("checkpoint header is not valid: ") + e.what());
    }

    NetworkPlan plan;
    try {
        plan = plan_network(cfg);
    } catch (const ConfigError& e) {
        throw CheckpointError(Kind::Malformed, std::string("checkpoint config is invalid: ") + e.what());
    }

    std::vector<Parameter> params;
    params.reserve(plan.params.size());
    for (const auto& spec : plan.params) {
        if (r.at_end()) {
            throw CheckpointError(Kind::Truncated, "checkpoint ends before parameter '" + spec.name + "'");
        }
        const auto name_len = r.pod<std::uint16_t>("parameter name length");
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len, "parameter name");
        const auto rank = r.pod<std::uint8_t>("parameter rank");
        Shape shape(rank);
        for (auto& e : shape) e = r.pod<std::uint32_t>("parameter extents");

        if (name != spec.name || shape != spec.shape) {
            throw CheckpointError(Kind::ShapeMismatch, "parameter '" + name + "' " + to_string(shape) +
                                                           " disagrees with embedded config, which expects '" +
                                                           spec.name + "' " + to_string(spec.shape));
        }

        std::vector<float> raw(shape_volume(shape));
        r.bytes(raw.data(), raw.size() * sizeof(float), ("payload of '" + name + "'").c_str());
        std::vector<Scalar> values(raw.begin(), raw.end());
        params.push_back({name, Tensor(shape, std::move(values))});
    }
    if (!r.at_end()) throw CheckpointError(Kind::Malformed, "trailing bytes after the last parameter");

    return {Network(std::move(plan), std::move(params)), std::move(meta)};
}

void save_checkpoint(const Network& net, const CheckpointMeta& meta, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(net, meta);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint '" + tmp.string() + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError(CheckpointError::Kind::Io, "short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError(CheckpointError::Kind::Io, "cannot move checkpoint into place: " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

void narrow_to_storage_precision(Network& net) {
    for (auto& p : net.parameters())
        for (auto& v : p.value.data()) v = static_cast<Scalar>(static_cast<float>(v));
}

}  // namespace hemocnn
