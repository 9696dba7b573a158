#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "actionseg/common.hpp"

namespace actionseg {

/// One grayscale image, luminance in [0, 255].
struct Frame {
  int index = 0;
  Plane pixels;

  int width() const { return pixels.width; }
  int height() const { return pixels.height; }
};

struct FrameSequence {
  std::vector<Frame> frames;
  double fps = 25.0;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }

  /// Throws Error(data) if dimensions differ, indices are not 0..n-1 or pixels leave [0, 255].
  void validate() const;
};

/// Per-frame action ordinals (1-based into action_names).
struct LabelTrack {
  std::vector<Label> labels;
  std::vector<std::string> action_names;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

enum class SequenceFormat { automatic, pgm_dir, y4m };

SequenceFormat parse_sequence_format(const std::string& name);

/// pgm-dir: every *.pgm in the directory, lexicographic filename order.
/// y4m: luma plane of every FRAME, stream order.
FrameSequence load_sequence(const std::filesystem::path& path,
                            SequenceFormat format = SequenceFormat::automatic);

Plane read_pgm(const std::filesystem::path& path);
void write_pgm(const Plane& image, const std::filesystem::path& path);

/// Writes frame_000000.pgm, frame_000001.pgm, ... into dir (created if missing).
/// Pixel values are rounded to the nearest integer.
void write_sequence_pgm_dir(const FrameSequence& seq, const std::filesystem::path& dir);

/// Writes a C420jpeg stream with neutral chroma.
void write_y4m(const FrameSequence& seq, const std::filesystem::path& path);

/// Label CSV: `start_frame,end_frame,action`, inclusive 0-based ranges covering
/// every frame exactly once. With an empty action_order, actions are numbered
/// by first appearance in frame order; otherwise names must come from action_order.
LabelTrack load_labels(const std::filesystem::path& path,
                       std::span<const std::string> action_order = {});
LabelTrack parse_labels(const std::string& text, std::span<const std::string> action_order = {});

void write_labels(const LabelTrack& track, const std::filesystem::path& path);
std::string format_labels(const LabelTrack& track);

}  // namespace actionseg
