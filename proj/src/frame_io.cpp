#include "actionseg/frame_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace actionseg {

namespace fs = std::filesystem;

void FrameSequence::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw_data("frame rate must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.width() < 1 || f.height() < 1) throw_data("frame has zero size");
    if (f.pixels.size() != static_cast<std::size_t>(f.width()) * f.height())
      throw_data("frame pixel count does not match its dimensions");
    if (f.width() != width() || f.height() != height())
      throw_data("inconsistent frame dimensions within one sequence");
    if (f.index != static_cast<int>(i)) throw_data("frame indices must be consecutive from 0");
    for (double p : f.pixels.values)
      if (!(p >= 0.0 && p <= 255.0)) throw_data("pixel value outside [0, 255]");
  }
}

void LabelTrack::validate() const {
  const int n_actions = static_cast<int>(action_names.size());
  for (Label l : labels)
    if (l < 1 || l > n_actions) throw_data("label refers to an undeclared action");
  for (std::size_t i = 0; i < action_names.size(); ++i)
    for (std::size_t j = i + 1; j < action_names.size(); ++j)
      if (action_names[i] == action_names[j]) throw_data("duplicate action name '" + action_names[i] + "'");
}

SequenceFormat parse_sequence_format(const std::string& name) {
  if (name.empty() || name == "auto") return SequenceFormat::automatic;
  if (name == "pgm-dir") return SequenceFormat::pgm_dir;
  if (name == "y4m") return SequenceFormat::y4m;
  throw_usage("unknown sequence format '" + name + "' (expected pgm-dir or y4m)");
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Netpbm header token reader: skips whitespace and '#' comments.
class HeaderScanner {
 public:
  explicit HeaderScanner(const std::string& bytes) : bytes_(bytes) {}

  std::string token() {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    return bytes_.substr(start, pos_ - start);
  }

  int integer(const char* what) {
    const std::string t = token();
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw_data(std::string("malformed PGM header: bad ") + what);
    return std::stoi(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw_data("malformed PGM header");
    return pos_ + 1;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

Plane decode_pgm(const std::string& bytes, const std::string& name) {
  HeaderScanner scan(bytes);
  if (scan.token() != "P5") throw_data("malformed PGM header in " + name + ": expected binary P5");
  const int w = scan.integer("width");
  const int h = scan.integer("height");
  const int maxval = scan.integer("maxval");
  if (w < 1 || h < 1) throw_data("malformed PGM header in " + name + ": zero size");
  if (maxval != 255) throw_data("unsupported PGM maxval in " + name + " (only 255 is accepted)");
  const std::size_t offset = scan.raster_offset();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < offset + n) throw_data("truncated PGM raster in " + name);
  Plane img(w, h);
  for (std::size_t i = 0; i < n; ++i) img.values[i] = static_cast<unsigned char>(bytes[offset + i]);
  return img;
}

unsigned char to_byte(double v) {
  const double r = std::round(std::clamp(v, 0.0, 255.0));
  return static_cast<unsigned char>(r);
}

FrameSequence load_pgm_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw_data("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (files.empty()) throw_data("no frames found in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  FrameSequence seq;
  seq.frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    Frame f;
    f.index = static_cast<int>(i);
    f.pixels = read_pgm(files[i]);
    if (i > 0 && !f.pixels.same_shape(seq.frames.front().pixels))
      throw_data("inconsistent frame dimensions within one sequence (" + files[i].filename().string() + ")");
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

struct Y4mHeader {
  int width = 0;
  int height = 0;
  double fps = 25.0;
  std::size_t chroma_bytes = 0;  // per frame, both planes
};

Y4mHeader parse_y4m_header(const std::string& line) {
  std::istringstream ss(line);
  std::string tok;
  ss >> tok;
  if (tok != "YUV4MPEG2") throw_data("malformed Y4M header: missing YUV4MPEG2 signature");
  Y4mHeader h;
  std::string colorspace = "420jpeg";
  while (ss >> tok) {
    const char key = tok[0];
    const std::string val = tok.substr(1);
    try {
      switch (key) {
        case 'W': h.width = std::stoi(val); break;
        case 'H': h.height = std::stoi(val); break;
        case 'F': {
          const auto colon = val.find(':');
          if (colon == std::string::npos) throw_data("malformed Y4M frame rate");
          const double num = std::stod(val.substr(0, colon));
          const double den = std::stod(val.substr(colon + 1));
          if (num > 0 && den > 0) h.fps = num / den;
          break;
        }
        case 'C': colorspace = val; break;
        default: break;
      }
    } catch (const std::logic_error&) {
      throw_data("malformed Y4M header field '" + tok + "'");
    }
  }
  if (h.width < 1 || h.height < 1) throw_data("malformed Y4M header: missing or invalid W/H");
  const std::size_t cw2 = static_cast<std::size_t>((h.width + 1) / 2);
  const std::size_t ch2 = static_cast<std::size_t>((h.height + 1) / 2);
  const std::size_t luma = static_cast<std::size_t>(h.width) * h.height;
  if (colorspace == "420" || colorspace == "420jpeg" || colorspace == "420mpeg2" || colorspace == "420paldv") {
    h.chroma_bytes = 2 * cw2 * ch2;
  } else if (colorspace == "422") {
    h.chroma_bytes = 2 * cw2 * static_cast<std::size_t>(h.height);
  } else if (colorspace == "444") {
    h.chroma_bytes = 2 * luma;
  } else if (colorspace == "mono") {
    h.chroma_bytes = 0;
  } else {
    throw_data("unsupported Y4M colorspace C" + colorspace);
  }
  return h;
}

FrameSequence load_y4m(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw_data("missing file: " + path.string());
  const std::string bytes = read_file(path);
  const auto eol = bytes.find('\n');
  if (eol == std::string::npos) throw_data("malformed Y4M header: no newline");
  const Y4mHeader h = parse_y4m_header(bytes.substr(0, eol));
  const std::size_t luma = static_cast<std::size_t>(h.width) * h.height;

  FrameSequence seq;
  seq.fps = h.fps;
  std::size_t pos = eol + 1;
  while (pos < bytes.size()) {
    const auto frame_eol = bytes.find('\n', pos);
    if (frame_eol == std::string::npos || bytes.compare(pos, 5, "FRAME") != 0)
      throw_data("malformed Y4M frame header at byte " + std::to_string(pos));
    pos = frame_eol + 1;
    if (bytes.size() < pos + luma + h.chroma_bytes) throw_data("truncated Y4M frame " + std::to_string(seq.size()));
    Frame f;
    f.index = static_cast<int>(seq.size());
    f.pixels = Plane(h.width, h.height);
    for (std::size_t i = 0; i < luma; ++i) f.pixels.values[i] = static_cast<unsigned char>(bytes[pos + i]);
    pos += luma + h.chroma_bytes;
    seq.frames.push_back(std::move(f));
  }
  if (seq.empty()) throw_data("no frames found in " + path.string());
  return seq;
}

}  // namespace

Plane read_pgm(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw_data("missing file: " + path.string());
  return decode_pgm(read_file(path), path.filename().string());
}

void write_pgm(const Plane& image, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::string raster(image.size(), '\0');
  for (std::size_t i = 0; i < image.size(); ++i) raster[i] = static_cast<char>(to_byte(image.values[i]));
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw_data("write failed: " + path.string());
}

void write_sequence_pgm_dir(const FrameSequence& seq, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_data("cannot create directory " + dir.string() + ": " + ec.message());
  char name[32];
  for (std::size_t i = 0; i < seq.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
    write_pgm(seq.frames[i].pixels, dir / name);
  }
}

void write_y4m(const FrameSequence& seq, const fs::path& path) {
  if (seq.empty()) throw_usage("cannot write an empty sequence");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  // Frame rate as an integer ratio with millesimal precision.
  const long long num = std::llround(seq.fps * 1000.0);
  out << "YUV4MPEG2 W" << seq.width() << " H" << seq.height() << " F" << num << ":1000 Ip A1:1 C420jpeg\n";
  const std::size_t chroma = 2 * static_cast<std::size_t>((seq.width() + 1) / 2) * ((seq.height() + 1) / 2);
  const std::string neutral(chroma, static_cast<char>(128));
  for (const Frame& f : seq.frames) {
    out << "FRAME\n";
    std::string luma(f.pixels.size(), '\0');
    for (std::size_t i = 0; i < luma.size(); ++i) luma[i] = static_cast<char>(to_byte(f.pixels.values[i]));
    out.write(luma.data(), static_cast<std::streamsize>(luma.size()));
    out.write(neutral.data(), static_cast<std::streamsize>(neutral.size()));
  }
  if (!out) throw_data("write failed: " + path.string());
}

FrameSequence load_sequence(const fs::path& path, SequenceFormat format) {
  if (!fs::exists(path)) throw_data("missing path: " + path.string());
  if (format == SequenceFormat::automatic)
    format = fs::is_directory(path) ? SequenceFormat::pgm_dir : SequenceFormat::y4m;
  FrameSequence seq = format == SequenceFormat::pgm_dir ? load_pgm_dir(path) : load_y4m(path);
  seq.validate();
  return seq;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long parse_frame_number(const std::string& s, int line_no) {
  const std::string t = trim(s);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw_data("label file line " + std::to_string(line_no) + ": bad frame number '" + t + "'");
  return std::stol(t);
}

}  // namespace

LabelTrack parse_labels(const std::string& text, std::span<const std::string> action_order) {
  struct Row {
    long start;
    long end;
    std::string action;
  };
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "start_frame,end_frame,action") throw_data("label file: expected header start_frame,end_frame,action");
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw_data("label file line " + std::to_string(line_no) + ": expected 3 fields");
    Row r{parse_frame_number(line.substr(0, c1), line_no), parse_frame_number(line.substr(c1 + 1, c2 - c1 - 1), line_no),
          trim(line.substr(c2 + 1))};
    if (r.action.empty()) throw_data("label file line " + std::to_string(line_no) + ": empty action name");
    if (r.end < r.start) throw_data("label file line " + std::to_string(line_no) + ": end_frame before start_frame");
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw_data("label file is empty");
  if (rows.empty()) throw_data("label file has no rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.start < b.start; });
  long expected = 0;
  for (const Row& r : rows) {
    if (r.start < expected) throw_data("overlapping label rows");
    if (r.start > expected) throw_data("gap in label rows before frame " + std::to_string(r.start));
    expected = r.end + 1;
  }

  LabelTrack track;
  std::map<std::string, Label> ordinal;
  if (!action_order.empty()) {
    for (const auto& name : action_order) {
      track.action_names.push_back(name);
      ordinal.emplace(name, static_cast<Label>(track.action_names.size()));
    }
  }
  track.labels.reserve(static_cast<std::size_t>(expected));
  for (const Row& r : rows) {
    auto it = ordinal.find(r.action);
    if (it == ordinal.end()) {
      if (!action_order.empty()) throw_data("unknown action name '" + r.action + "'");
      track.action_names.push_back(r.action);
      it = ordinal.emplace(r.action, static_cast<Label>(track.action_names.size())).first;
    }
    track.labels.insert(track.labels.end(), static_cast<std::size_t>(r.end - r.start + 1), it->second);
  }
  track.validate();
  return track;
}

LabelTrack load_labels(const fs::path& path, std::span<const std::string> action_order) {
  if (!fs::is_regular_file(path)) throw_data("missing label file: " + path.string());
  return parse_labels(read_file(path), action_order);
}

std::string format_labels(const LabelTrack& track) {
  track.validate();
  std::ostringstream out;
  out << "start_frame,end_frame,action\n";
  std::size_t start = 0;
  for (std::size_t i = 1; i <= track.labels.size(); ++i) {
    if (i == track.labels.size() || track.labels[i] != track.labels[start]) {
      out << start << ',' << (i - 1) << ',' << track.action_names[static_cast<std::size_t>(track.labels[start] - 1)]
          << '\n';
      start = i;
    }
  }
  return out.str();
}

void write_labels(const LabelTrack& track, const fs::path& path) {
  const std::string text = format_labels(track);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << text;
  if (!out) throw_data("write failed: " + path.string());
}

}  // namespace actionseg
