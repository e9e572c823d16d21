// SPDX-License-Identifier: Apache-2.0
#include "ghostlab/gtf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ghostlab {

static_assert(std::endian::native == std::endian::little,
              "GTF writer assumes a little-endian host");

void save_tensor(const TensorF& t, const std::string& path) {
  checked_numel(t.dims);
  if (t.numel() != static_cast<int64_t>(t.data.size())) {
    throw std::runtime_error("gtf: dims/payload mismatch in tensor");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("gtf: cannot open for write: " + path);

  // Header bytes are assembled by hand so two runs emit identical files.
  std::ostringstream hdr;
  hdr << "{\"magic\":\"GTF1\",\"dtype\":\"f32\",\"dims\":[";
  for (size_t i = 0; i < t.dims.size(); ++i) hdr << (i ? "," : "") << t.dims[i];
  hdr << "]}\n";
  const std::string h = hdr.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));

  std::vector<float> payload(t.data.size());
  for (size_t i = 0; i < t.data.size(); ++i) payload[i] = static_cast<float>(t.data[i]);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw std::runtime_error("gtf: short write: " + path);
}

TensorF load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("gtf: cannot open for read: " + path);

  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("gtf: missing header line: " + path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("gtf: malformed header: " + std::string(e.what()));
  }
  if (j.value("magic", "") != "GTF1") throw std::runtime_error("gtf: bad magic in " + path);
  if (j.value("dtype", "") != "f32") throw std::runtime_error("gtf: unsupported dtype in " + path);
  if (!j.contains("dims") || !j["dims"].is_array()) {
    throw std::runtime_error("gtf: header missing dims array");
  }

  TensorF t;
  for (const auto& d : j["dims"]) {
    if (!d.is_number_integer()) throw std::runtime_error("gtf: non-integer dim");
    t.dims.push_back(d.get<int64_t>());
  }
  const int64_t n = checked_numel(t.dims);

  std::vector<float> payload(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(float))) {
    throw std::runtime_error("gtf: truncated payload in " + path);
  }
  char extra;
  if (in.read(&extra, 1)) throw std::runtime_error("gtf: trailing bytes in " + path);

  t.data.resize(payload.size());
  for (size_t i = 0; i < payload.size(); ++i) t.data[i] = static_cast<double>(payload[i]);
  return t;
}

}  // namespace ghostlab
