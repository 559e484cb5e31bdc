#include "mdsyn/matcher.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mdsyn/kernels.hpp"

namespace mdsyn::matcher {

std::vector<Keypoint> detect(const ImageF& gray, const DetectorConfig& cfg) {
  if (gray.channels() != 1) throw Error(ErrorCode::InvalidArgument, "detector expects a grayscale image");
  const int w = gray.width();
  const int h = gray.height();
  std::vector<Keypoint> out;
  if (w == 0 || h == 0 || cfg.max_keypoints <= 0) return out;

  const ImageF response = kernels::harris_response(gray, cfg.sigma, cfg.harris_k);
  float peak = 0.0f;
  for (float v : response.data()) peak = std::max(peak, v);
  if (!(peak > 0.0f)) return out;
  const double floor_value = std::max(static_cast<double>(peak) * cfg.relative_threshold, 1e-12);

  const int r = cfg.nms_radius;
  const int b = std::max(cfg.border, 0);
  std::vector<std::vector<Keypoint>> rows(h);
#pragma omp parallel for schedule(dynamic, 8)
  for (int y = b; y < h - b; ++y) {
    for (int x = b; x < w - b; ++x) {
      const float v = response(x, y);
      if (v < floor_value) continue;
      bool is_max = true;
      for (int dy = -r; dy <= r && is_max; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w || (dx == 0 && dy == 0)) continue;
          const float u = response(xx, yy);
          // Equal responses: the earlier pixel in (y, x) order wins.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (u > v || (u == v && earlier)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) rows[y].push_back({x, y, v});
    }
  }
  for (auto& row : rows) out.insert(out.end(), row.begin(), row.end());
  std::stable_sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    return std::tie(a.y, a.x) < std::tie(b.y, b.x);
  });
  if (out.size() > static_cast<std::size_t>(cfg.max_keypoints)) out.resize(cfg.max_keypoints);
  return out;
}

Descriptor describe(const ImageF& gray, const Keypoint& kp) {
  constexpr int kSide = 2 * kPatchRadius;  // 18: 16x16 core plus a one-pixel ring
  if (kp.x - kPatchRadius < 0 || kp.y - kPatchRadius < 0 || kp.x + kPatchRadius - 1 >= gray.width() ||
      kp.y + kPatchRadius - 1 >= gray.height()) {
    throw Error(ErrorCode::BorderKeypoint, "keypoint too close to the image border");
  }
  double patch[kSide][kSide];
  for (int j = 0; j < kSide; ++j)
    for (int i = 0; i < kSide; ++i) patch[j][i] = gray(kp.x - kPatchRadius + i, kp.y - kPatchRadius + j);

  double mean = 0.0;
  for (int j = 1; j < kSide - 1; ++j)
    for (int i = 1; i < kSide - 1; ++i) mean += patch[j][i];
  mean /= 256.0;
  double var = 0.0;
  for (int j = 1; j < kSide - 1; ++j)
    for (int i = 1; i < kSide - 1; ++i) var += (patch[j][i] - mean) * (patch[j][i] - mean);
  const double sd = std::sqrt(var / 256.0);
  if (sd < 1e-8) throw Error(ErrorCode::FlatPatch, "constant patch has no descriptor");
  for (auto& row : patch)
    for (double& v : row) v = (v - mean) / sd;

  std::array<double, kDescriptorSize> hist{};
  constexpr double kBinWidth = std::numbers::pi / 8.0;
  for (int j = 1; j < kSide - 1; ++j) {
    for (int i = 1; i < kSide - 1; ++i) {
      const double gx = 0.5 * (patch[j][i + 1] - patch[j][i - 1]);
      const double gy = 0.5 * (patch[j + 1][i] - patch[j - 1][i]);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += std::numbers::pi;
      const double pos = theta / kBinWidth - 0.5;
      const double lo = std::floor(pos);
      const double frac = pos - lo;
      const int b0 = (static_cast<int>(lo) + 8) % 8;
      const int b1 = (b0 + 1) % 8;
      const double dx = i - 8.5, dy = j - 8.5;
      const double weight = mag * std::exp(-(dx * dx + dy * dy) / (2.0 * 64.0));
      const int cell = ((j - 1) / 4) * 4 + (i - 1) / 4;
      hist[cell * 8 + b0] += weight * (1.0 - frac);
      hist[cell * 8 + b1] += weight * frac;
    }
  }
  auto normalize = [&hist]() {
    double n = 0.0;
    for (double v : hist) n += v * v;
    n = std::sqrt(n);
    if (n == 0.0) throw Error(ErrorCode::FlatPatch, "patch has no gradient energy");
    for (double& v : hist) v /= n;
  };
  normalize();
  for (double& v : hist) v = std::min(v, 0.2);
  normalize();
  Descriptor d;
  for (int k = 0; k < kDescriptorSize; ++k) d[k] = static_cast<float>(hist[k]);
  return d;
}

Features extract(const ImageF& gray, const DetectorConfig& cfg) {
  Features f;
  for (const Keypoint& kp : detect(gray, cfg)) {
    try {
      f.descriptors.push_back(describe(gray, kp));
      f.keypoints.push_back(kp);
    } catch (const Error&) {
    }
  }
  return f;
}

namespace {

using DescMatrix = Eigen::Matrix<double, Eigen::Dynamic, kDescriptorSize, Eigen::RowMajor>;

DescMatrix to_matrix(std::span<const Descriptor> d) {
  DescMatrix m(static_cast<Eigen::Index>(d.size()), kDescriptorSize);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int k = 0; k < kDescriptorSize; ++k) m(static_cast<Eigen::Index>(i), k) = d[i][k];
  return m;
}

struct Nearest {
  int index = -1;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();

  void offer(int idx, double d2) {
    if (d2 < best) {
      second = best;
      best = d2;
      index = idx;
    } else if (d2 < second) {
      second = d2;
    }
  }
  bool passes_ratio(double ratio) const { return !std::isfinite(second) || best < ratio * ratio * second; }
};

}  // namespace

std::vector<IndexMatch> mutual_nn(std::span<const Descriptor> a, std::span<const Descriptor> b, double ratio) {
  std::vector<IndexMatch> out;
  if (a.empty() || b.empty()) return out;
  const DescMatrix ma = to_matrix(a);
  const DescMatrix mb = to_matrix(b);
  const Eigen::VectorXd na = ma.rowwise().squaredNorm();
  const Eigen::VectorXd nb = mb.rowwise().squaredNorm();
  // Squared distances |a|^2 + |b|^2 - 2 a.b, clamped at 0 against rounding.
  Eigen::MatrixXd d2 = -2.0 * (ma * mb.transpose());
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  d2 = d2.cwiseMax(0.0);

  const auto n_a = static_cast<int>(a.size());
  const auto n_b = static_cast<int>(b.size());
  std::vector<Nearest> row_nn(n_a), col_nn(n_b);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_a; ++i)
    for (int j = 0; j < n_b; ++j) row_nn[i].offer(j, d2(i, j));
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n_b; ++j)
    for (int i = 0; i < n_a; ++i) col_nn[j].offer(i, d2(i, j));

  for (int i = 0; i < n_a; ++i) {
    const int j = row_nn[i].index;
    if (j < 0 || col_nn[j].index != i) continue;
    if (!row_nn[i].passes_ratio(ratio) || !col_nn[j].passes_ratio(ratio)) continue;
    out.push_back({i, j, std::sqrt(d2(i, j))});
  }
  return out;
}

MatchSet match_mutual_nn(const Features& a, const Features& b, double ratio) {
  MatchSet set;
  for (const IndexMatch& m : mutual_nn(a.descriptors, b.descriptors, ratio)) {
    const Keypoint& ka = a.keypoints[m.a];
    const Keypoint& kb = b.keypoints[m.b];
    set.matches.push_back({static_cast<double>(ka.x), static_cast<double>(ka.y), static_cast<double>(kb.x),
                           static_cast<double>(kb.y), std::clamp(1.0 - m.distance / 2.0, 0.0, 1.0)});
  }
  return set;
}

MatchSet match_images(const ImageF& a, const ImageF& b, const BaselineConfig& cfg) {
  return match_mutual_nn(extract(a, cfg.detector), extract(b, cfg.detector), cfg.ratio);
}

std::string baseline_identity(const BaselineConfig& cfg) {
  std::ostringstream s;
  s << "baseline-harris-mnn(max_kp=" << cfg.detector.max_keypoints << ",nms=" << cfg.detector.nms_radius
    << ",ratio=" << cfg.ratio << ")";
  return s.str();
}

namespace {

constexpr std::string_view kMagic = "MDSYN-MATCHES";
constexpr std::string_view kVersion = "v1";

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) parts.push_back(line.substr(start, i - start));
  }
  return parts;
}

double parse_number(std::string_view token, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + std::string(token) + "'");
  }
  return v;
}

bool inside(double x, double y, int w, int h) { return x >= -0.5 && y >= -0.5 && x <= w - 0.5 && y <= h - 0.5; }

}  // namespace

MatchSet parse_matches(std::string_view text, const std::optional<ImageBounds>& bounds) {
  MatchSet set;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::vector<std::string_view> parts = split_spaces(line);
    if (!header_seen) {
      if (parts.size() != 4 || parts[0] != kMagic || parts[1] != kVersion) {
        throw Error(ErrorCode::ParseError, "line 1: expected 'MDSYN-MATCHES v1 <imageA> <imageB>'");
      }
      set.image_a = parts[2];
      set.image_b = parts[3];
      header_seen = true;
      continue;
    }
    if (parts.empty()) continue;
    if (parts.size() != 5) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 5 fields");
    }
    Match m{parse_number(parts[0], line_no), parse_number(parts[1], line_no), parse_number(parts[2], line_no),
            parse_number(parts[3], line_no), parse_number(parts[4], line_no)};
    if (m.score < 0.0 || m.score > 1.0) {
      throw Error(ErrorCode::BoundsError, "line " + std::to_string(line_no) + ": score outside [0, 1]");
    }
    if (bounds && (!inside(m.xa, m.ya, bounds->width_a, bounds->height_a) ||
                   !inside(m.xb, m.yb, bounds->width_b, bounds->height_b))) {
      throw Error(ErrorCode::BoundsError, "line " + std::to_string(line_no) + ": coordinate outside the image");
    }
    set.matches.push_back(m);
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, "line 1: missing header");
  return set;
}

MatchSet ingest_matches(const std::filesystem::path& path, const std::optional<ImageBounds>& bounds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_matches(buf.str(), bounds);
}

std::string format_matches(const MatchSet& matches) {
  if (matches.image_a.find_first_of(" \n") != std::string::npos ||
      matches.image_b.find_first_of(" \n") != std::string::npos || matches.image_a.empty() ||
      matches.image_b.empty()) {
    throw Error(ErrorCode::InvalidArgument, "image ids must be non-empty and free of whitespace");
  }
  std::string out;
  out.append(kMagic).append(" ").append(kVersion).append(" ");
  out.append(matches.image_a).append(" ").append(matches.image_b).append("\n");
  char buf[32];
  for (const Match& m : matches.matches) {
    const double fields[5] = {m.xa, m.ya, m.xb, m.yb, m.score};
    for (int k = 0; k < 5; ++k) {
      const auto res = std::to_chars(buf, buf + sizeof buf, fields[k]);
      out.append(buf, res.ptr);
      out.push_back(k == 4 ? '\n' : ' ');
    }
  }
  return out;
}

void write_matches(const std::filesystem::path& path, const MatchSet& matches) {
  const std::string text = format_matches(matches);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out << text;
}

}  // namespace mdsyn::matcher
