#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adaptvo/image.hpp"

namespace adaptvo {

enum class ImageFormat { Png, Pgm };

// Single images. PNG (8-bit gray or color) and binary PGM/PPM are accepted on
// read; color is converted with luma weights 0.299/0.587/0.114.
GrayImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const GrayImage& image);

// Middlebury .flo: "PIEH", int32 width, int32 height, then (du, dv) float32
// pairs row-major, all little-endian. Invalid pixels are written as 1e10 and
// any component with magnitude above 1e9 reads back as invalid.
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& flow);

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

// TUM trajectory text: "timestamp tx ty tz qx qy qz qw" per line; '#' comments.
std::vector<TimedPose> read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::filesystem::path& path, const std::vector<TimedPose>& poses);

std::string frame_filename(int index, ImageFormat format);
std::string flow_filename(int index);
inline constexpr const char* kPoseFileName = "poses.txt";

/// Reads frame_%06d.{png,pgm}, optional flow_%06d.flo (flow from that frame
/// to the next) and optional poses.txt. Without poses, timestamps are
/// index / fallback_fps.
std::vector<SequenceFrame> load_sequence(const std::filesystem::path& dir, double fallback_fps = 30.0);

void save_sequence(const std::filesystem::path& dir, const std::vector<SequenceFrame>& frames,
                   ImageFormat format = ImageFormat::Png);

/// Subdirectories of `root` that contain at least one frame file, sorted by name.
/// If `root` itself holds frames it is returned alone.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root);

}  // namespace adaptvo
