#include "adaptvo/sequence_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <sstream>

#include "adaptvo/error.hpp"

namespace fs = std::filesystem;

namespace adaptvo {
namespace {

constexpr float kUnknownFlow = 1e10f;
constexpr float kUnknownFlowThreshold = 1e9f;

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

float luma(int r, int g, int b) {
  return static_cast<float>((0.299 * r + 0.587 * g + 0.114 * b) / 255.0);
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return f;
}

GrayImage read_png(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "corrupt png " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  std::vector<png_byte> buf(static_cast<std::size_t>(png_get_rowbytes(png, info)) * h);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * png_get_rowbytes(png, info);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    const png_byte* r = rows[y];
    for (int x = 0; x < w; ++x) {
      const png_byte* p = r + static_cast<std::size_t>(x) * channels;
      img(x, y) = channels >= 3 ? luma(p[0], p[1], p[2]) : static_cast<float>(p[0] / 255.0);
    }
  }
  return img;
}

void write_png(const fs::path& path, const GrayImage& image) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "png write failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    const float* src = image.row(y);
    for (int x = 0; x < image.width(); ++x) row[x] = quantize(src[x]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Netpbm header token reader: skips whitespace and '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

GrayImage read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P6") throw Error(ErrorCode::IoError, "unsupported netpbm type in " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pnm_token(in));
    h = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "bad netpbm header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw Error(ErrorCode::IoError, "unsupported netpbm geometry in " + path.string());
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw Error(ErrorCode::IoError, "truncated netpbm data in " + path.string());
  GrayImage img(w, h);
  const double scale = 255.0 / maxval;
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    const unsigned char* p = buf.data() + i * channels;
    img.data()[i] = channels == 3 ? luma(static_cast<int>(p[0] * scale), static_cast<int>(p[1] * scale),
                                         static_cast<int>(p[2] * scale))
                                  : static_cast<float>(p[0] / static_cast<double>(maxval));
  }
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> buf(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) buf[i] = quantize(image.data()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

template <typename T>
T from_le(const unsigned char* p) {
  static_assert(sizeof(T) == 4);
  std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                    (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<T>(u);
}

template <typename T>
void to_le(T value, unsigned char* p) {
  static_assert(sizeof(T) == 4);
  const auto u = std::bit_cast<std::uint32_t>(value);
  p[0] = static_cast<unsigned char>(u & 0xff);
  p[1] = static_cast<unsigned char>((u >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((u >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

std::string lowercase_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

}  // namespace

GrayImage read_image(const fs::path& path) {
  const std::string ext = lowercase_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw Error(ErrorCode::IoError, "unsupported image extension " + path.string());
}

void write_image(const fs::path& path, const GrayImage& image) {
  const std::string ext = lowercase_ext(path);
  if (ext == ".png") return write_png(path, image);
  if (ext == ".pgm") return write_pgm(path, image);
  throw Error(ErrorCode::IoError, "unsupported image extension " + path.string());
}

FlowField read_flo(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::array<unsigned char, 12> header{};
  in.read(reinterpret_cast<char*>(header.data()), 12);
  if (in.gcount() != 12) throw Error(ErrorCode::CorruptFlow, "truncated header in " + path.string());
  if (std::memcmp(header.data(), "PIEH", 4) != 0) throw Error(ErrorCode::CorruptFlow, "bad magic in " + path.string());
  const auto w = from_le<std::int32_t>(header.data() + 4);
  const auto h = from_le<std::int32_t>(header.data() + 8);
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
    throw Error(ErrorCode::CorruptFlow, "implausible dimensions in " + path.string());
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<unsigned char> payload(n * 8);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size()) || in.peek() != EOF)
    throw Error(ErrorCode::CorruptFlow, "payload size mismatch in " + path.string());
  FlowField flow(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    const float u = from_le<float>(payload.data() + 8 * i);
    const float v = from_le<float>(payload.data() + 8 * i + 4);
    const bool ok = std::isfinite(u) && std::isfinite(v) && std::abs(u) < kUnknownFlowThreshold &&
                    std::abs(v) < kUnknownFlowThreshold;
    flow.du[i] = ok ? u : 0.0f;
    flow.dv[i] = ok ? v : 0.0f;
    flow.valid[i] = ok ? 1 : 0;
  }
  return flow;
}

void write_flo(const fs::path& path, const FlowField& flow) {
  const std::size_t n = static_cast<std::size_t>(flow.width) * flow.height;
  if (flow.du.size() != n || flow.dv.size() != n || flow.valid.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "flow field arrays do not match its dimensions");
  std::vector<unsigned char> buf(12 + 8 * n);
  std::memcpy(buf.data(), "PIEH", 4);
  to_le<std::int32_t>(flow.width, buf.data() + 4);
  to_le<std::int32_t>(flow.height, buf.data() + 8);
  for (std::size_t i = 0; i < n; ++i) {
    to_le<float>(flow.valid[i] ? flow.du[i] : kUnknownFlow, buf.data() + 12 + 8 * i);
    to_le<float>(flow.valid[i] ? flow.dv[i] : kUnknownFlow, buf.data() + 16 + 8 * i);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<TimedPose> read_pose_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<TimedPose> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::array<double, 8> v{};
    for (double& x : v) {
      if (!(ss >> x)) throw Error(ErrorCode::MalformedPoseLine, path.string() + ":" + std::to_string(lineno));
    }
    std::string extra;
    if (ss >> extra) throw Error(ErrorCode::MalformedPoseLine, path.string() + ":" + std::to_string(lineno));
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.5) || !(q.norm() < 2.0))
      throw Error(ErrorCode::MalformedPoseLine, path.string() + ":" + std::to_string(lineno) + " bad quaternion");
    q.normalize();
    poses.push_back({v[0], Pose(q, Eigen::Vector3d(v[1], v[2], v[3]))});
  }
  return poses;
}

void write_pose_file(const fs::path& path, const std::vector<TimedPose>& poses) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  FilePtr guard(f);
  std::fprintf(f, "# timestamp tx ty tz qx qy qz qw\n");
  for (const auto& p : poses) {
    const auto& q = p.pose.rotation;
    const auto& t = p.pose.translation;
    std::fprintf(f, "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", p.timestamp, t.x(), t.y(), t.z(), q.x(),
                 q.y(), q.z(), q.w());
  }
}

std::string frame_filename(int index, ImageFormat format) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d.%s", index, format == ImageFormat::Png ? "png" : "pgm");
  return buf;
}

std::string flow_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "flow_%06d.flo", index);
  return buf;
}

std::vector<SequenceFrame> load_sequence(const fs::path& dir, double fallback_fps) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  static const std::regex frame_re(R"(frame_(\d{6})\.(png|pgm|ppm))", std::regex::icase);
  static const std::regex flow_re(R"(flow_(\d{6})\.flo)");
  std::map<int, fs::path> images;
  std::map<int, fs::path> flows;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, frame_re)) {
      const int idx = std::stoi(m[1].str());
      if (!images.emplace(idx, entry.path()).second)
        throw Error(ErrorCode::IoError, "duplicate frame index " + std::to_string(idx) + " in " + dir.string());
    } else if (std::regex_match(name, m, flow_re)) {
      flows.emplace(std::stoi(m[1].str()), entry.path());
    }
  }
  std::vector<SequenceFrame> frames;
  if (images.empty()) return frames;
  int expected = images.begin()->first;
  for (const auto& [idx, path] : images) {
    if (idx != expected) throw Error(ErrorCode::MissingFrame, "frame " + std::to_string(expected) + " missing in " + dir.string());
    ++expected;
    SequenceFrame f;
    f.index = idx;
    f.timestamp = idx / fallback_fps;
    f.image = read_image(path);
    if (auto it = flows.find(idx); it != flows.end()) {
      f.gt_flow_to_next = read_flo(it->second);
      if (f.gt_flow_to_next->width != f.image.width() || f.gt_flow_to_next->height != f.image.height())
        throw Error(ErrorCode::CorruptFlow, "flow size mismatch for frame " + std::to_string(idx));
    }
    frames.push_back(std::move(f));
  }
  const fs::path pose_path = dir / kPoseFileName;
  if (fs::exists(pose_path)) {
    const auto poses = read_pose_file(pose_path);
    if (poses.size() < frames.size())
      throw Error(ErrorCode::MalformedPoseLine, "pose file has fewer lines than frames in " + dir.string());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      frames[i].pose = poses[i].pose;
      frames[i].timestamp = poses[i].timestamp;
    }
    for (std::size_t i = 1; i < frames.size(); ++i)
      if (!(frames[i].timestamp > frames[i - 1].timestamp))
        throw Error(ErrorCode::MalformedPoseLine, "timestamps not strictly increasing in " + pose_path.string());
  }
  return frames;
}

void save_sequence(const fs::path& dir, const std::vector<SequenceFrame>& frames, ImageFormat format) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<TimedPose> poses;
  for (const auto& f : frames) {
    write_image(dir / frame_filename(f.index, format), f.image);
    if (f.gt_flow_to_next) write_flo(dir / flow_filename(f.index), *f.gt_flow_to_next);
    if (f.pose) poses.push_back({f.timestamp, *f.pose});
  }
  if (!poses.empty()) {
    if (poses.size() != frames.size())
      throw Error(ErrorCode::InvalidArgument, "either all frames or none must carry a pose");
    write_pose_file(dir / kPoseFileName, poses);
  }
}

std::vector<fs::path> list_sequences(const fs::path& root) {
  static const std::regex frame_re(R"(frame_\d{6}\.(png|pgm|ppm))", std::regex::icase);
  auto has_frames = [](const fs::path& d) {
    for (const auto& e : fs::directory_iterator(d))
      if (e.is_regular_file() && std::regex_match(e.path().filename().string(), frame_re)) return true;
    return false;
  };
  if (!fs::is_directory(root)) throw Error(ErrorCode::IoError, "not a directory: " + root.string());
  if (has_frames(root)) return {root};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && has_frames(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace adaptvo
