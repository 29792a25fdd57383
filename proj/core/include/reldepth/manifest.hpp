#pragma once

// Line-oriented dataset manifest. Paths are relative to the manifest's
// directory and may not contain whitespace.
//
//   reldepth-manifest 1
//   clip   <id> <train|val|test> <height> <width>
//   frame  <clip> <index> <timestamp> <image.png> <disparity.pfm|->
//   flow   <clip> <from> <to> <flow.flo>
//   stereo <clip> <index> <right.png> <left_to_right.flo> <right_to_left.flo>
//
// A clip belongs to exactly one split; frame indices run 0..n-1 in order.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reldepth/clip.hpp"

namespace reldepth {

enum class Split { train, val, test };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct FrameRecord {
  std::size_t index = 0;
  double timestamp = 0.0;
  std::string image;
  std::string disparity;  // empty when absent
};

struct FlowRecord {
  std::size_t from = 0;
  std::size_t to = 0;
  std::string path;
};

struct StereoRecord {
  std::size_t index = 0;
  std::string right_image;
  std::string flow_lr;
  std::string flow_rl;
};

struct ClipRecord {
  std::string id;
  Split split = Split::train;
  Size2 size;
  std::vector<FrameRecord> frames;
  std::vector<FlowRecord> flows;
  std::vector<StereoRecord> stereo;
};

struct Manifest {
  static constexpr int kVersion = 1;

  std::filesystem::path root;
  std::vector<ClipRecord> clips;

  const ClipRecord* find(std::string_view id) const;
  std::vector<const ClipRecord*> split(Split s) const;
  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }

  // Structural checks; with check_files also that every referenced file
  // exists under root. Throws FormatError.
  void validate(bool check_files) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Frames, disparity (when every frame has one) and lazily loaded flows.
ClipSample load_clip(const Manifest& manifest, const ClipRecord& clip);
// Every frame with disparity in clips of the given split.
std::vector<SupervisedSample> load_supervised(const Manifest& manifest, Split split);

// FlowSource backed by .flo files.
class FileFlowSource : public FlowSource {
 public:
  explicit FileFlowSource(std::map<std::pair<std::size_t, std::size_t>, std::filesystem::path> files)
      : files_(std::move(files)) {}
  // Throws std::out_of_range when the pair has no file.
  FlowField flow(std::size_t from, std::size_t to) const override;

 private:
  std::map<std::pair<std::size_t, std::size_t>, std::filesystem::path> files_;
};

}  // namespace reldepth
