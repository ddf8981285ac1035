#include "hagi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace hagi {
namespace {

constexpr char kMagic[8] = {'H', 'A', 'G', 'I', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw ValidationError("checkpoint truncated reading " + what);
  return value;
}

std::vector<MotionSource> modalities_from_json(const nlohmann::json& j) {
  std::vector<MotionSource> out;
  for (const auto& m : j) out.push_back(motion_source_from_string(m.get<std::string>()));
  return out;
}

}  // namespace

nlohmann::json config_to_json(const DenoiserConfig& c) {
  nlohmann::json mods = nlohmann::json::array();
  for (auto m : c.modalities) mods.push_back(to_string(m));
  return {
      {"seq_len", c.seq_len},
      {"latent_dim", c.latent_dim},
      {"blocks", c.blocks},
      {"heads", c.heads},
      {"ffn_multiplier", c.ffn_multiplier},
      {"bands", c.bands},
      {"modalities", mods},
      {"mode", to_string(c.mode)},
      {"film", c.film},
      {"positional_encoding", c.positional_encoding},
      {"head_filter", to_string(c.head_filter)},
      {"wrist_filter", to_string(c.wrist_filter)},
  };
}

DenoiserConfig config_from_json(const nlohmann::json& j) {
  try {
    DenoiserConfig c;
    c.seq_len = j.at("seq_len").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.blocks = j.at("blocks").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ffn_multiplier = j.at("ffn_multiplier").get<int>();
    c.bands = j.at("bands").get<int>();
    c.modalities = modalities_from_json(j.at("modalities"));
    c.mode = denoiser_mode_from_string(j.at("mode").get<std::string>());
    c.film = j.at("film").get<bool>();
    c.positional_encoding = j.value("positional_encoding", true);
    c.head_filter = motion_filter_from_string(j.value("head_filter", std::string("full")));
    c.wrist_filter = motion_filter_from_string(j.value("wrist_filter", std::string("full")));
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model config: ") + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("stored model config is invalid: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const nlohmann::json header = {
      {"config", config_to_json(ck.config)},
      {"schedule",
       {{"steps", ck.schedule.steps},
        {"min_noise", ck.schedule.min_noise},
        {"max_noise", ck.schedule.max_noise},
        {"noise", ck.schedule.noise}}},
      {"meta", ck.meta},
  };
  const std::string text = header.dump();
  const auto tensors = ck.params.tensors();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint8_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.tensor->rows()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.tensor->cols()));
      for (Eigen::Index r = 0; r < t.tensor->rows(); ++r)
        for (Eigen::Index c = 0; c < t.tensor->cols(); ++c) put<double>(out, (*t.tensor)(r, c));
    }
    if (!out) throw RuntimeFailure("failed while writing checkpoint " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw RuntimeFailure("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ValidationError(path.string() + " is not a checkpoint file");
  }
  const auto version = get<std::uint8_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get<std::uint32_t>(in, "header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), header_len)) throw ValidationError("checkpoint truncated in header");

  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ck.config = config_from_json(header.at("config"));
    const auto& s = header.at("schedule");
    ck.schedule = schedule_from_noise(s.at("noise").get<std::vector<double>>(), s.at("min_noise").get<double>(),
                                      s.at("max_noise").get<double>());
    if (ck.schedule.steps != s.at("steps").get<int>()) throw ValidationError("schedule step count mismatch");
    ck.meta = header.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }

  Rng rng(0);
  ck.params = init_params<double>(ck.config, rng);
  std::map<std::string, Matrix<double>*> slots;
  for (auto& t : ck.params.tensors()) slots.emplace(t.name, t.tensor);

  const auto count = get<std::uint32_t>(in, "tensor count");
  if (count != slots.size()) {
    throw ValidationError("checkpoint holds " + std::to_string(count) + " tensors but its config needs " +
                          std::to_string(slots.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint16_t>(in, "tensor name");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ValidationError("checkpoint truncated in tensor name");
    const auto rows = get<std::uint32_t>(in, name);
    const auto cols = get<std::uint32_t>(in, name);
    const auto it = slots.find(name);
    if (it == slots.end()) throw ValidationError("unexpected tensor '" + name + "' in checkpoint");
    Matrix<double>& dst = *it->second;
    if (dst.rows() != rows || dst.cols() != cols) {
      throw ValidationError("tensor '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", config expects " + std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()));
    }
    for (Eigen::Index r = 0; r < dst.rows(); ++r)
      for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(r, c) = get<double>(in, name);
    if (!dst.allFinite()) throw ValidationError("tensor '" + name + "' holds non-finite values");
    slots.erase(it);
  }
  return ck;
}

}  // namespace hagi
