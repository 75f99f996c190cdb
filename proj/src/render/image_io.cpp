#include <bit>
#include <cctype>
#include <cstring>

#include <json.hpp>

#include "stackcount/render.h"

static_assert(std::endian::native == std::endian::little,
              "image I/O assumes a little-endian host");

namespace stackcount {
namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& s, size_t* pos, const std::string& path) {
  size_t i = *pos;
  while (i < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[i]))) {
      ++i;
    } else if (s[i] == '#') {
      while (i < s.size() && s[i] != '\n') ++i;
    } else {
      break;
    }
  }
  size_t j = i;
  while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
  if (j == i) fail(errc::config, path + ": truncated header");
  *pos = j;
  return s.substr(i, j - i);
}

int parse_dim(const std::string& tok, const std::string& path) {
  try {
    size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(errc::config, path + ": bad image dimension '" + tok + "'");
  }
}

}  // namespace

void write_pfm(const std::string& path, const DepthMap& d) {
  if (d.width < 1 || d.height < 1) fail(errc::config, "write_pfm: empty depth map");
  std::string buf = "Pf\n" + std::to_string(d.width) + " " + std::to_string(d.height) +
                    "\n-1.0\n";
  size_t header = buf.size();
  buf.resize(header + size_t(d.width) * d.height * 4);
  char* out = buf.data() + header;
  for (int v = d.height - 1; v >= 0; --v) {  // PFM rows run bottom-up
    std::memcpy(out, &d.depths[size_t(v) * d.width], size_t(d.width) * 4);
    out += size_t(d.width) * 4;
  }
  write_file(path, buf);
}

DepthMap read_pfm(const std::string& path) {
  std::string s = read_file(path);
  size_t pos = 0;
  std::string magic = next_token(s, &pos, path);
  if (magic != "Pf")
    fail(errc::config, path + ": expected grayscale PFM magic 'Pf', got '" + magic + "'");
  int w = parse_dim(next_token(s, &pos, path), path);
  int h = parse_dim(next_token(s, &pos, path), path);
  std::string scale = next_token(s, &pos, path);
  if (scale.empty() || scale[0] != '-')
    fail(errc::config, path + ": big-endian PFM is not supported");
  ++pos;  // single whitespace separates header from samples
  size_t need = size_t(w) * h * 4;
  if (pos + need > s.size()) fail(errc::config, path + ": truncated PFM samples");
  DepthMap d(w, h);
  for (int v = h - 1; v >= 0; --v) {
    std::memcpy(&d.depths[size_t(v) * w], s.data() + pos, size_t(w) * 4);
    pos += size_t(w) * 4;
  }
  return d;
}

void write_pgm(const std::string& path, const Mask& m) {
  if (m.width < 1 || m.height < 1) fail(errc::config, "write_pgm: empty mask");
  std::string buf =
      "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  buf.reserve(buf.size() + m.bits.size());
  for (uint8_t b : m.bits) buf.push_back(b ? char(255) : char(0));
  write_file(path, buf);
}

Mask read_pgm(const std::string& path) {
  std::string s = read_file(path);
  size_t pos = 0;
  std::string magic = next_token(s, &pos, path);
  if (magic != "P5") fail(errc::config, path + ": expected binary PGM magic 'P5'");
  int w = parse_dim(next_token(s, &pos, path), path);
  int h = parse_dim(next_token(s, &pos, path), path);
  int maxval = parse_dim(next_token(s, &pos, path), path);
  if (maxval > 255) fail(errc::config, path + ": 16-bit PGM is not supported");
  ++pos;
  size_t need = size_t(w) * h;
  if (pos + need > s.size()) fail(errc::config, path + ": truncated PGM samples");
  Mask m(w, h);
  for (size_t i = 0; i < need; ++i) m.bits[i] = s[pos + i] != 0 ? 1 : 0;
  return m;
}

void write_cameras_json(const std::string& path, const std::vector<Camera>& cams) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Camera& c : cams) {
    nlohmann::ordered_json j;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["w"] = c.width;
    j["h"] = c.height;
    j["R"] = c.pose.R.m;
    j["t"] = std::array<double, 3>{c.pose.t.x, c.pose.t.y, c.pose.t.z};
    arr.push_back(std::move(j));
  }
  write_file(path, arr.dump(2) + "\n");
}

std::vector<Camera> read_cameras_json(const std::string& path) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(errc::config, path + ": " + e.what());
  }
  if (!arr.is_array()) fail(errc::config, path + ": expected a JSON array of cameras");
  std::vector<Camera> cams;
  for (const auto& j : arr) {
    try {
      Camera c;
      c.fx = j.at("fx").get<double>();
      c.fy = j.at("fy").get<double>();
      c.cx = j.at("cx").get<double>();
      c.cy = j.at("cy").get<double>();
      c.width = j.at("w").get<int>();
      c.height = j.at("h").get<int>();
      auto r = j.at("R").get<std::array<double, 9>>();
      auto t = j.at("t").get<std::array<double, 3>>();
      c.pose.R.m = r;
      c.pose.t = {t[0], t[1], t[2]};
      if (c.fx <= 0 || c.fy <= 0 || c.width < 1 || c.height < 1)
        fail(errc::config, path + ": bad camera intrinsics");
      Mat3 gram = c.pose.R.transposed() * c.pose.R;
      double dev = 0;
      for (int i = 0; i < 9; ++i) {
        double e = gram.m[size_t(i)] - (i % 4 == 0 ? 1.0 : 0.0);
        dev += e * e;
      }
      if (std::sqrt(dev) >= 1e-9) fail(errc::config, path + ": camera pose not orthonormal");
      cams.push_back(c);
    } catch (const nlohmann::json::exception& e) {
      fail(errc::config, path + ": " + e.what());
    }
  }
  return cams;
}

}  // namespace stackcount
