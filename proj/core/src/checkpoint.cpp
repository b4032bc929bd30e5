#include "tsadapt/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "tsadapt/errors.hpp"

namespace tsadapt {

namespace {

nlohmann::json config_digest(const ModelConfig& c) {
  return {
      {"layers", c.layers},       {"heads", c.heads},
      {"hidden_dim", c.hidden_dim}, {"patch_size", c.patch_size},
      {"input_length", c.input_length}, {"horizon", c.horizon},
      {"n_vars", c.n_vars},       {"rank", c.rank},
  };
}

}  // namespace

void save_adapters(const std::string& path, FrozenTransformer& model) {
  nlohmann::json header;
  header["format"] = "tsadapt-ckpt-v1";
  header["dtype"] = "f32";
  header["config"] = config_digest(model.config());

  auto tensors = model.adapter_tensors();
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header["tensors"].push_back({{"name", name},
                                 {"shape", t->shape},
                                 {"offset", offset},
                                 {"count", t->size()}});
    offset += t->size();
  }

  const std::string head = header.dump();
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("save_adapters: cannot write '" + path + "'");
  const std::uint32_t head_len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& [name, t] : tensors) {
    (void)name;
    for (double v : t->data) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
}

void load_adapters(const std::string& path, FrozenTransformer& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_adapters: cannot open '" + path + "'");
  std::uint32_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  in.read(head.data(), head_len);
  nlohmann::json header = nlohmann::json::parse(head, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "tsadapt-ckpt-v1") {
    throw ValidationError("load_adapters: '" + path + "' is not a checkpoint");
  }

  auto tensors = model.adapter_tensors();
  const auto& manifest = header.at("tensors");
  if (manifest.size() != tensors.size()) {
    throw ValidationError("load_adapters: manifest lists " +
                          std::to_string(manifest.size()) + " tensors, model has " +
                          std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& entry = manifest[i];
    auto& [name, t] = tensors[i];
    if (entry.at("name") != name ||
        entry.at("shape").get<std::vector<std::size_t>>() != t->shape) {
      throw ValidationError("load_adapters: manifest entry " +
                            std::to_string(i) + " does not match tensor '" +
                            name + "'");
    }
    for (double& v : t->data) {
      float f = 0.0f;
      in.read(reinterpret_cast<char*>(&f), sizeof(f));
      v = static_cast<double>(f);
    }
  }
  if (!in) throw ValidationError("load_adapters: truncated blob in '" + path + "'");
}

std::size_t file_size_bytes(const std::string& path) {
  std::error_code ec;
  const auto n = std::filesystem::file_size(path, ec);
  if (ec) throw ValidationError("file_size_bytes: cannot stat '" + path + "'");
  return static_cast<std::size_t>(n);
}

}  // namespace tsadapt
