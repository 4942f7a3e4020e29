#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include "ofmt/dataset.hpp"
#include "ofmt/pipeline.hpp"
#include "ofmt/train.hpp"

namespace fs = std::filesystem;
using namespace ofmt;

namespace {

// Every run starts by echoing the fully resolved configuration so that a
// rerun with these values reproduces the outputs exactly.
void print_resolved(const CLI::App* cmd) {
  std::cerr << "resolved config [" << cmd->get_name() << "]:\n";
  for (const auto* opt : cmd->get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string val = opt->count() ? opt->results()[0] : opt->get_default_str();
    if (val.empty()) val = "(unset)";
    std::cerr << "  " << opt->get_name() << " = " << val << "\n";
  }
}

struct PipelineFlags {
  double eps_s = 1.0, lambda = 5.0, sigma = 1.0, tau_eig = 1e-2;
  int window = 5, levels = 3;
  std::string mode = "additive";

  void attach(CLI::App* cmd) {
    cmd->add_option("--eps-s", eps_s, "flow magnitude threshold")->capture_default_str();
    cmd->add_option("--tau-eig", tau_eig, "flow validity eigenvalue threshold")
        ->capture_default_str();
    cmd->add_option("--lambda", lambda, "foreground weight")->capture_default_str();
    cmd->add_option("--sigma", sigma, "pre-smoothing sigma")->capture_default_str();
    cmd->add_option("--window", window, "LK window size")->capture_default_str();
    cmd->add_option("--levels", levels, "pyramid levels")->capture_default_str();
    cmd->add_option("--mode", mode, "accumulation mode: additive|union")
        ->check(CLI::IsMember({"additive", "union"}))
        ->capture_default_str();
  }

  PipelineParams params() const {
    PipelineParams p;
    p.eps_s = eps_s;
    p.lambda_fg = lambda;
    p.lk.sigma = sigma;
    p.lk.tau_eig = tau_eig;
    p.lk.window = window;
    p.lk.levels = levels;
    p.ofmt_mode = mode == "union" ? OfmtMode::Union : OfmtMode::Additive;
    return p;
  }
};

ModelSpec spec_for(const std::string& stream, const std::string& preset) {
  if (stream == "2d") return preset == "paper" ? paper_lenet_spec() : desk_lenet_spec();
  return preset == "paper" ? paper_c3d_spec() : desk_c3d_spec();
}

std::vector<Sample> stream_samples(const std::vector<GestureClip>& clips,
                                   const std::string& stream, const PipelineParams& pp,
                                   const ModelSpec& spec) {
  std::vector<Sample> out;
  for (size_t i = 0; i < clips.size(); ++i) {
    if (stream == "2d")
      out.push_back(
          {ofmt_image_to_tensor(clip_to_ofmt_image(clips[i], pp), spec.input_shape[1]),
           clips[i].label});
    else
      out.push_back({clip_to_c3d_tensor(clips[i], pp), clips[i].label});
    std::cerr << "\rfeatures " << (i + 1) << "/" << clips.size() << std::flush;
  }
  std::cerr << "\n";
  return out;
}

GestureClip load_single_clip(const std::string& dir) {
  std::map<int, fs::path> frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string fn = e.path().filename().string();
    const std::string ext = e.path().extension().string();
    if (fn.rfind("frame_", 0) == 0 && (ext == ".png" || ext == ".pgm"))
      frames[std::stoi(fn.substr(6, fn.size() - 6 - ext.size()))] = e.path();
  }
  if (frames.size() < 2) throw DataError("clip '" + dir + "' has fewer than 2 frames");
  GestureClip clip;
  clip.label = 0;  // unknown; prediction does not use it
  clip.source = ClipSource::Directory;
  for (const auto& [idx, path] : frames) clip.frames.frames.push_back(load_image(path.string()));
  return clip;
}

int run_training(const std::string& stream, const std::string& data, const std::string& weights,
                 const std::string& preset, const PipelineFlags& pf, TrainConfig cfg,
                 int augment_copies) {
  auto clips = load_frame_dataset(data);
  ModelSpec spec = spec_for(stream, preset);
  auto samples = stream_samples(clips, stream, pf.params(), spec);
  if (augment_copies > 0 && stream == "2d") {
    std::mt19937_64 rng(cfg.seed ^ 0xa46u);
    AugmentPolicy policy;
    std::vector<Sample> extra;
    for (size_t i = 0; i < clips.size(); ++i) {
      Image8 base = clip_to_ofmt_image(clips[i], pf.params());
      for (int k = 0; k < augment_copies; ++k)
        extra.push_back({ofmt_image_to_tensor(augment_image(base, policy, rng),
                                              spec.input_shape[1]),
                         clips[i].label});
    }
    samples.insert(samples.end(), extra.begin(), extra.end());
  }
  std::mt19937_64 rng(cfg.seed);
  auto model = build_model<float>(spec, rng);
  auto logs = train_model(model, samples, {}, cfg, /*verbose=*/true);
  save_weights(model, weights);
  for (const auto& l : logs) std::cout << log_line(l) << "\n";
  std::cerr << "saved weights to " << weights << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optical-flow motion template gesture lab"};
  app.require_subcommand(1);
  app.set_config("--config", "", "configuration file (TOML; flags take precedence)");

  // gensynth
  auto* gen = app.add_subcommand("gensynth", "generate a synthetic air-written-digit dataset");
  std::string gen_out = "synth";
  int gen_subjects = 3, gen_reps = 3, gen_size = 64, gen_frames = 24;
  uint64_t gen_seed = 42;
  gen->add_option("--out", gen_out, "output dataset directory")->capture_default_str();
  gen->add_option("--subjects", gen_subjects)->capture_default_str();
  gen->add_option("--reps", gen_reps, "repetitions per digit per subject")->capture_default_str();
  gen->add_option("--frame-size", gen_size)->capture_default_str();
  gen->add_option("--frames", gen_frames, "frames per clip")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();

  // ofmt
  auto* ofc = app.add_subcommand("ofmt", "render OFMT images for every clip in a dataset");
  std::string ofmt_in, ofmt_out = "templates";
  PipelineFlags ofmt_pf;
  ofc->add_option("--in", ofmt_in, "dataset root")->required();
  ofc->add_option("--out", ofmt_out, "output directory")->capture_default_str();
  ofmt_pf.attach(ofc);

  // train2d / train3d
  std::string tr_data, tr_weights = "model.ofmt", tr_preset = "desk";
  int tr_epochs = -1, tr_batch = -1, tr_augment = 0;
  uint64_t tr_seed = 0;
  PipelineFlags tr_pf;
  auto add_train_opts = [&](CLI::App* cmd) {
    cmd->add_option("--data", tr_data, "dataset root")->required();
    cmd->add_option("--weights", tr_weights, "output weight file")->capture_default_str();
    cmd->add_option("--preset", tr_preset, "model preset: desk|paper")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->capture_default_str();
    cmd->add_option("--epochs", tr_epochs, "epoch count (default per stream)");
    cmd->add_option("--batch", tr_batch, "batch size (default per stream)");
    cmd->add_option("--seed", tr_seed)->capture_default_str();
    tr_pf.attach(cmd);
  };
  auto* t2 = app.add_subcommand("train2d", "train the 2D CNN on OFMT images");
  add_train_opts(t2);
  t2->add_option("--augment", tr_augment, "augmented copies per training image")
      ->capture_default_str();
  auto* t3 = app.add_subcommand("train3d", "train the 3D CNN on frame volumes");
  add_train_opts(t3);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate saved weights on a dataset");
  std::string ev_data, ev_weights, ev_stream = "2d", ev_preset = "desk";
  PipelineFlags ev_pf;
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--weights", ev_weights)->required();
  ev->add_option("--stream", ev_stream, "2d|3d")->check(CLI::IsMember({"2d", "3d"}));
  ev->add_option("--preset", ev_preset)->check(CLI::IsMember({"desk", "paper"}));
  ev_pf.attach(ev);

  // fuse
  auto* fu = app.add_subcommand("fuse", "decision-level fusion of the two streams");
  std::string fu_data, fu_w3d, fu_w2d, fu_preset = "desk";
  double fu_g = 0.6, fu_d = 0.4;
  bool fu_sweep = false;
  PipelineFlags fu_pf;
  fu->add_option("--data", fu_data)->required();
  fu->add_option("--weights3d", fu_w3d)->required();
  fu->add_option("--weights2d", fu_w2d)->required();
  fu->add_option("--w3", fu_g, "3D stream weight (gamma)")->capture_default_str();
  fu->add_option("--w2", fu_d, "2D stream weight (delta)")->capture_default_str();
  fu->add_option("--preset", fu_preset)->check(CLI::IsMember({"desk", "paper"}));
  fu->add_flag("--sweep", fu_sweep, "also report the six (gamma,delta) pairs");
  fu_pf.attach(fu);

  // predict
  auto* pr = app.add_subcommand("predict", "classify a single clip directory");
  std::string pr_clip, pr_w3d, pr_w2d, pr_preset = "desk";
  double pr_g = 0.6, pr_d = 0.4;
  PipelineFlags pr_pf;
  pr->add_option("--clip", pr_clip, "directory of frame_%05d images")->required();
  pr->add_option("--weights3d", pr_w3d)->required();
  pr->add_option("--weights2d", pr_w2d)->required();
  pr->add_option("--w3", pr_g)->capture_default_str();
  pr->add_option("--w2", pr_d)->capture_default_str();
  pr->add_option("--preset", pr_preset)->check(CLI::IsMember({"desk", "paper"}));
  pr_pf.attach(pr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
      return app.exit(e);
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  print_resolved(cmd);

  try {
    if (cmd == gen) {
      auto ds = generate_synthetic(gen_subjects, gen_reps, gen_size, gen_frames, gen_seed);
      export_dataset(ds.clips, gen_out);
      std::cout << "clips=" << ds.clips.size() << " out=" << gen_out << "\n";
    } else if (cmd == ofc) {
      auto clips = load_frame_dataset(ofmt_in);
      fs::create_directories(ofmt_out);
      PipelineParams pp = ofmt_pf.params();
      for (const auto& clip : clips) {
        const std::string name =
            std::to_string(clip.label) + "_" + clip.subject + "_ofmt.png";
        write_png((fs::path(ofmt_out) / name).string(), render_template(clip_to_ofmt(clip, pp)));
        std::cout << name << "\n";
      }
    } else if (cmd == t2 || cmd == t3) {
      const std::string stream = cmd == t2 ? "2d" : "3d";
      TrainConfig cfg = stream == "2d" ? default_2d_config() : default_3d_config();
      if (tr_epochs > 0) cfg.epochs = tr_epochs;
      if (tr_batch > 0) cfg.batch_size = tr_batch;
      cfg.seed = tr_seed;
      return run_training(stream, tr_data, tr_weights, tr_preset, tr_pf, cfg, tr_augment);
    } else if (cmd == ev) {
      auto model = load_weights(ev_weights, spec_for(ev_stream, ev_preset));
      auto clips = load_frame_dataset(ev_data);
      auto samples = stream_samples(clips, ev_stream, ev_pf.params(), model.spec);
      auto r = evaluate_model(model, samples);
      std::cout << "accuracy=" << r.accuracy << "\n";
      std::cout << "confusion (rows true, cols predicted):\n" << confusion_csv(r);
    } else if (cmd == fu) {
      auto c3d = load_weights(fu_w3d, spec_for("3d", fu_preset));
      auto lenet = load_weights(fu_w2d, spec_for("2d", fu_preset));
      auto clips = load_frame_dataset(fu_data);
      PipelineParams pp = fu_pf.params();
      auto s3 = stream_samples(clips, "3d", pp, c3d.spec);
      auto s2 = stream_samples(clips, "2d", pp, lenet.spec);
      auto fused_acc = [&](double g, double d) {
        long correct = 0;
        for (size_t i = 0; i < clips.size(); ++i) {
          auto f = fuse_scores(class_scores(c3d, s3[i].input), class_scores(lenet, s2[i].input),
                               {g, d});
          if (argmax_class(f) == clips[i].label) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(clips.size());
      };
      std::cout << "fused_accuracy w3=" << fu_g << " w2=" << fu_d << " acc="
                << fused_acc(fu_g, fu_d) << "\n";
      if (fu_sweep) {
        std::cout << "sweep:\n";
        for (double g : {0.8, 0.7, 0.6, 0.5, 0.4, 0.2})
          std::cout << "  w3=" << g << " w2=" << 1.0 - g << " acc=" << fused_acc(g, 1.0 - g)
                    << "\n";
      }
    } else if (cmd == pr) {
      auto c3d = load_weights(pr_w3d, spec_for("3d", pr_preset));
      auto lenet = load_weights(pr_w2d, spec_for("2d", pr_preset));
      auto clip = load_single_clip(pr_clip);
      auto p = predict(clip, c3d, lenet, {pr_g, pr_d}, pr_pf.params());
      std::cout << "class=" << p.label << "\nscores=";
      for (size_t i = 0; i < p.scores.size(); ++i) std::cout << (i ? "," : "") << p.scores[i];
      std::cout << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
