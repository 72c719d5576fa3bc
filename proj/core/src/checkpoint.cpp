#include "feexd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace feexd {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts unsupported");

namespace {
constexpr const char *kVersion = "feexd-ckpt-1";
}

void save_params(const std::string &prefix, const ParamSet &ps) {
  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto &[name, t] : ps.items)
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape}});

  std::ofstream mf(prefix + ".json", std::ios::trunc);
  if (!mf) throw std::runtime_error("cannot write " + prefix + ".json");
  mf << manifest.dump(2) << "\n";
  mf.close();
  if (!mf) throw std::runtime_error("write failed: " + prefix + ".json");

  std::ofstream bf(prefix + ".bin", std::ios::binary | std::ios::trunc);
  if (!bf) throw std::runtime_error("cannot write " + prefix + ".bin");
  for (const auto &[name, t] : ps.items)
    bf.write(reinterpret_cast<const char *>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  bf.close();
  if (!bf) throw std::runtime_error("write failed: " + prefix + ".bin");
}

ParamSet load_params(const std::string &prefix) {
  std::ifstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("cannot open " + prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.value("version", "") != kVersion)
    throw std::runtime_error("checkpoint version mismatch in " + prefix +
                             ".json (want " + kVersion + ")");

  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("cannot open " + prefix + ".bin");

  ParamSet ps;
  for (const auto &entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    bf.read(reinterpret_cast<char *>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (bf.gcount() !=
        static_cast<std::streamsize>(t.data.size() * sizeof(double)))
      throw std::runtime_error("checkpoint blob truncated: " + prefix + ".bin");
    if (!t.all_finite())
      throw std::runtime_error("checkpoint " + prefix + ".bin holds non-finite values");
    ps.add(name, std::move(t));
  }
  bf.peek();
  if (!bf.eof())
    throw std::runtime_error("checkpoint blob has trailing bytes: " + prefix + ".bin");
  return ps;
}

}  // namespace feexd
