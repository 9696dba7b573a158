#include "actionseg/actionseg.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "actionseg/dense_motion.hpp"
#include "actionseg/pipeline.hpp"

using namespace actionseg;

struct as_config {
  PipelineConfig cfg;
};
struct as_sequence {
  FrameSequence seq;
};
struct as_features {
  std::vector<FrameFeatures> frames;
};
struct as_model {
  GmmModel model;
};
struct as_bank {
  ModelBank bank;
};
struct as_segmentation {
  Segmentation seg;
};

namespace {

thread_local std::string last_error;

as_status fail(as_status status, const char* msg) {
  last_error = msg;
  return status;
}

// Runs body, translating exceptions into status codes.
template <typename F>
as_status guarded(F&& body) {
  try {
    body();
    return AS_OK;
  } catch (const Error& e) {
    return fail(static_cast<as_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(AS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AS_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw_usage(std::string(what) + " is null");
}

std::string str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* as_version(void) { return "0.1.0"; }
const char* as_last_error(void) { return last_error.c_str(); }
void as_string_free(char* s) { std::free(s); }

as_status as_config_new(as_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new as_config;
  });
}

void as_config_free(as_config* cfg) { delete cfg; }

as_status as_config_set(as_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

as_status as_config_load(as_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    cfg->cfg.load_file(path);
  });
}

as_status as_config_validate(const as_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.validate();
  });
}

as_status as_config_to_text(const as_config* cfg, char** text) {
  return guarded([&] {
    require(cfg, "config");
    require(text, "text");
    *text = dup_string(cfg->cfg.to_text());
  });
}

as_status as_sequence_load(const char* path, const char* format, as_sequence** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto seq = std::make_unique<as_sequence>();
    seq->seq = load_sequence(path, parse_sequence_format(str(format)));
    *out = seq.release();
  });
}

void as_sequence_free(as_sequence* seq) { delete seq; }
size_t as_sequence_frame_count(const as_sequence* seq) { return seq == nullptr ? 0 : seq->seq.size(); }
int as_sequence_width(const as_sequence* seq) { return seq == nullptr ? 0 : seq->seq.width(); }
int as_sequence_height(const as_sequence* seq) { return seq == nullptr ? 0 : seq->seq.height(); }

as_status as_sequence_frame(const as_sequence* seq, size_t i, double* dst, size_t dst_len) {
  return guarded([&] {
    require(seq, "sequence");
    require(dst, "dst");
    if (i >= seq->seq.size()) throw_usage("frame index out of range");
    const auto& v = seq->seq.frames[i].pixels.values;
    if (dst_len < v.size()) throw_usage("destination buffer too small");
    std::memcpy(dst, v.data(), v.size() * sizeof(double));
  });
}

as_status as_flow_dump(const as_config* cfg, const as_sequence* seq, size_t t, const char* stem) {
  return guarded([&] {
    require(cfg, "config");
    require(seq, "sequence");
    require(stem, "stem");
    cfg->cfg.validate();
    if (t == 0 || t >= seq->seq.size()) throw_usage("flow frame must lie in [1, frame_count)");
    write_flow_dump(horn_schunck(seq->seq.frames[t - 1], seq->seq.frames[t], cfg->cfg.flow), stem);
  });
}

as_status as_features_extract(const as_config* cfg, const as_sequence* seq, as_features** out) {
  return guarded([&] {
    require(cfg, "config");
    require(seq, "sequence");
    require(out, "out");
    cfg->cfg.validate();
    auto f = std::make_unique<as_features>();
    f->frames = cached_video_features(seq->seq, cfg->cfg);
    *out = f.release();
  });
}

void as_features_free(as_features* f) { delete f; }
size_t as_features_frame_count(const as_features* f) { return f == nullptr ? 0 : f->frames.size(); }

int as_features_frame_index(const as_features* f, size_t i) {
  return f == nullptr || i >= f->frames.size() ? -1 : f->frames[i].frame_index;
}

size_t as_features_vector_count(const as_features* f, size_t i) {
  return f == nullptr || i >= f->frames.size() ? 0 : f->frames[i].vectors.size();
}

as_status as_features_vectors(const as_features* f, size_t i, double* dst, size_t dst_len) {
  return guarded([&] {
    require(f, "features");
    require(dst, "dst");
    if (i >= f->frames.size()) throw_usage("frame index out of range");
    const auto& vecs = f->frames[i].vectors;
    if (dst_len < vecs.size() * kFeatureDim) throw_usage("destination buffer too small");
    for (std::size_t k = 0; k < vecs.size(); ++k) std::memcpy(dst + k * kFeatureDim, vecs[k].data(), sizeof(vecs[k]));
  });
}

as_status as_model_load(const char* path, as_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<as_model>();
    m->model = load_model(path);
    *out = m.release();
  });
}

as_status as_model_save(const as_model* m, const char* path) {
  return guarded([&] {
    require(m, "model");
    require(path, "path");
    save_model(m->model, path);
  });
}

void as_model_free(as_model* m) { delete m; }
size_t as_model_dim(const as_model* m) { return m == nullptr ? 0 : m->model.dim(); }
size_t as_model_components(const as_model* m) { return m == nullptr ? 0 : m->model.n_components(); }

as_status as_model_log_pdf(const as_model* m, const double* x, size_t dim, double* out) {
  return guarded([&] {
    require(m, "model");
    require(x, "x");
    require(out, "out");
    if (dim != m->model.dim()) throw_usage("point dimension does not match the model");
    *out = m->model.log_pdf(std::span<const double>(x, dim));
  });
}

as_status as_bank_load(const char* dir, as_bank** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    auto b = std::make_unique<as_bank>();
    b->bank = load_bank(dir);
    *out = b.release();
  });
}

void as_bank_free(as_bank* b) { delete b; }
size_t as_bank_action_count(const as_bank* b) { return b == nullptr ? 0 : b->bank.action_count(); }

const char* as_bank_action_name(const as_bank* b, int a) {
  if (b == nullptr || a < 1 || static_cast<std::size_t>(a) > b->bank.action_count()) return nullptr;
  return b->bank.action_names()[static_cast<std::size_t>(a - 1)].c_str();
}

as_status as_segment(const as_config* cfg, const as_bank* b, const as_features* f, size_t n_frames,
                     as_segmentation** out) {
  return guarded([&] {
    require(cfg, "config");
    require(b, "bank");
    require(f, "features");
    require(out, "out");
    cfg->cfg.validate();
    const int window = window_in_retained_frames(cfg->cfg.window_frames, cfg->cfg.frame_stride);
    auto s = std::make_unique<as_segmentation>();
    s->seg = segment_video(f->frames, b->bank, window, static_cast<int>(n_frames));
    *out = s.release();
  });
}

void as_segmentation_free(as_segmentation* s) { delete s; }
size_t as_segmentation_frame_count(const as_segmentation* s) { return s == nullptr ? 0 : s->seg.frame_labels.size(); }

int as_segmentation_frame_label(const as_segmentation* s, size_t t) {
  return s == nullptr || t >= s->seg.frame_labels.size() ? 0 : s->seg.frame_labels[t];
}

size_t as_segmentation_segment_count(const as_segmentation* s) { return s == nullptr ? 0 : s->seg.segments.size(); }

as_status as_segmentation_segment(const as_segmentation* s, size_t i, int* start_frame, int* end_frame, int* action) {
  return guarded([&] {
    require(s, "segmentation");
    if (i >= s->seg.segments.size()) throw_usage("segment index out of range");
    const Segment& seg = s->seg.segments[i];
    if (start_frame != nullptr) *start_frame = seg.start_frame;
    if (end_frame != nullptr) *end_frame = seg.end_frame;
    if (action != nullptr) *action = seg.action;
  });
}

as_status as_segmentation_csv(const as_segmentation* s, const as_bank* b, char** csv) {
  return guarded([&] {
    require(s, "segmentation");
    require(b, "bank");
    require(csv, "csv");
    *csv = dup_string(format_segmentation_csv(s->seg, b->bank.action_names()));
  });
}

as_status as_cmd_train(const as_config* cfg, const char* manifest, const char* out_dir, size_t* model_files) {
  return guarded([&] {
    require(cfg, "config");
    require(manifest, "manifest");
    require(out_dir, "out_dir");
    const TrainSummary summary = cmd_train(cfg->cfg, manifest, out_dir);
    if (model_files != nullptr) *model_files = summary.model_files;
  });
}

as_status as_cmd_segment(const as_config* cfg, const char* models_dir, const char* video, const char* out_csv,
                         const char* scores_json) {
  return guarded([&] {
    require(cfg, "config");
    require(models_dir, "models_dir");
    require(video, "video");
    require(out_csv, "out_csv");
    cmd_segment(cfg->cfg, models_dir, video, out_csv, str(scores_json));
  });
}

as_status as_cmd_eval(const as_config* cfg, const char* models_dir, const char* manifest, const char* out_json,
                      const char* pred_dir, char** report_text) {
  return guarded([&] {
    require(cfg, "config");
    require(models_dir, "models_dir");
    require(manifest, "manifest");
    require(out_json, "out_json");
    const EvalOutcome outcome = cmd_eval(cfg->cfg, models_dir, manifest, out_json, str(pred_dir));
    if (report_text != nullptr) *report_text = dup_string(outcome.text);
  });
}

as_status as_cmd_synth(const char* spec_path, uint64_t seed, const char* out_dir, size_t* instances,
                       size_t* test_videos) {
  return guarded([&] {
    require(spec_path, "spec_path");
    require(out_dir, "out_dir");
    const SynthSummary summary = cmd_synth(spec_path, seed, out_dir);
    if (instances != nullptr) *instances = summary.instances;
    if (test_videos != nullptr) *test_videos = summary.test_videos;
  });
}

}  // extern "C"
