#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grin/checkpoint.hpp"
#include "grin/errors.hpp"
#include "grin/gradcheck.hpp"
#include "grin/graph.hpp"
#include "grin/image.hpp"
#include "grin/log.hpp"
#include "grin/net.hpp"
#include "grin/pipeline.hpp"
#include "grin/synthetic.hpp"
#include "grin/trainer.hpp"

namespace {

// Exit codes shared by all subcommands: 0 success, 1 verification failure,
// 2 usage or input error, 3 training divergence.
constexpr int kOk = 0;
constexpr int kVerifyFail = 1;
constexpr int kUsage = 2;
constexpr int kDiverged = 3;

struct TrainFlags {
  grin::TrainConfig cfg;
  std::string adjacency = "gram";
  std::string activation = "none";
};

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Turns a "key = value" config file into --key=value tokens for the named
// subcommand. Keys must be long option names of that subcommand; anything
// else is rejected by name.
std::vector<std::string> config_tokens(const std::string& path, const CLI::App* sub) {
  std::ifstream file(path);
  if (!file) throw grin::GrinError("config: cannot read '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw grin::GrinError("config: line " + std::to_string(line_no) + " of '" + path +
                            "' is not key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw grin::GrinError("config: line " + std::to_string(line_no) + " of '" + path +
                            "' has an empty key or value");
    }
    if (key == "config" || sub->get_option_no_throw("--" + key) == nullptr) {
      throw grin::GrinError("config: unknown key '" + key + "' in '" + path + "'");
    }
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

// Pulls --config options out of the raw arguments and splices the file's
// tokens in right after the subcommand name, so later command-line flags
// override them under the take-last policy.
std::vector<std::string> expand_config(std::vector<std::string> args, const CLI::App& app) {
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      paths.push_back(args[i + 1]);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      paths.push_back(args[i].substr(9));
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  if (paths.empty()) return args;
  if (args.empty()) throw grin::GrinError("config: --config requires a subcommand");
  const CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) {
    throw grin::GrinError("config: --config must follow a subcommand, got '" + args[0] + "'");
  }
  std::vector<std::string> expanded{args[0]};
  for (const std::string& path : paths) {
    for (std::string& token : config_tokens(path, sub)) expanded.push_back(std::move(token));
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

int run_train(const TrainFlags& flags) {
  grin::TrainConfig cfg = flags.cfg;
  cfg.pipeline.adjacency_variant = flags.adjacency == "cosine"
                                       ? grin::AdjacencyVariant::cosine
                                       : grin::AdjacencyVariant::gram;
  cfg.pipeline.activation = flags.activation == "rectifier" ? grin::Activation::rectifier
                                                            : grin::Activation::none;

  const grin::TrainResult result = grin::train(cfg);
  if (!result.trace.empty()) {
    const grin::LossReport& last = result.trace.back();
    grin::log_info("train: ", cfg.steps, " steps, final total ", last.total, " (content ",
                   last.content, ", style ", last.style, ")");
  } else {
    grin::log_info("train: 0 steps, wrote initial state");
  }
  if (!cfg.trace_path.empty()) grin::log_info("train: trace written to ", cfg.trace_path);
  if (!cfg.checkpoint_path.empty()) {
    grin::log_info("train: checkpoint written to ", cfg.checkpoint_path);
  }
  return kOk;
}

int run_stylize(const std::string& content_path, const std::string& style_path,
                const std::string& checkpoint_path, const std::string& out_path, double eps) {
  const grin::Checkpoint ck = grin::load_checkpoint(checkpoint_path);
  if (ck.encoder_seed != grin::kEncoderSeed) {
    throw grin::FormatError("stylize: checkpoint was produced for encoder seed " +
                            std::to_string(ck.encoder_seed) + ", this build uses " +
                            std::to_string(grin::kEncoderSeed));
  }
  const grin::DecoderParams dec = grin::DecoderParams::from_params(ck.params);
  const grin::Encoder enc = grin::Encoder::make();

  auto load_snapped = [](const std::string& path, const char* role) {
    grin::Image8 img = grin::read_png(path);
    const int w = grin::snap_down(img.width, 8);
    const int h = grin::snap_down(img.height, 8);
    if (w != img.width || h != img.height) {
      grin::log_info("stylize: ", role, " image is ", img.width, "x", img.height,
                     ", resizing to ", w, "x", h);
      img = grin::resize_nearest(img, w, h);
    }
    return grin::image_to_tensor(img);
  };

  const grin::Tensor4 content = load_snapped(content_path, "content");
  const grin::Tensor4 style = load_snapped(style_path, "style");
  const grin::Tensor4 out = grin::stylize_tensor(enc, dec, content, style, eps);
  grin::write_png(grin::tensor_to_image(out), out_path);
  grin::log_info("stylize: wrote ", out_path);
  return kOk;
}

int run_gradcheck(std::uint64_t seed, double tolerance) {
  std::vector<grin::GroupCheck> groups = grin::check_primitives(seed);
  for (const grin::GroupCheck& g : grin::check_pipeline(seed, false)) {
    groups.push_back({"loss/" + g.group, g.max_rel_err, g.coords_checked});
  }
  for (const grin::GroupCheck& g : grin::check_pipeline(seed, true)) {
    groups.push_back({"loss-frozen/" + g.group, g.max_rel_err, g.coords_checked});
  }

  const grin::GroupCheck* worst = nullptr;
  for (const grin::GroupCheck& g : groups) {
    std::printf("%-32s %.3e  (%d coords)\n", g.group.c_str(), g.max_rel_err, g.coords_checked);
    if (!worst || g.max_rel_err > worst->max_rel_err) worst = &g;
  }
  for (const grin::GroupCheck& g : groups) {
    if (!(g.max_rel_err < tolerance)) {
      std::printf("FAIL: group '%s' error %.3e is not below tolerance %.3e\n", g.group.c_str(),
                  g.max_rel_err, tolerance);
      return kVerifyFail;
    }
  }
  std::printf("OK: %zu groups below tolerance %.3e (worst %.3e in '%s')\n", groups.size(),
              tolerance, worst ? worst->max_rel_err : 0.0,
              worst ? worst->group.c_str() : "none");
  return kOk;
}

void print_matrix(const char* label, const grin::Matrix& m) {
  std::printf("%s (%d x %d):\n", label, m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    std::printf(" ");
    for (int c = 0; c < m.cols; ++c) std::printf(" %12.8f", m.at(r, c));
    std::printf("\n");
  }
}

void append_matrix_csv(std::string& out, const char* label, const grin::Matrix& m) {
  out += "# ";
  out += label;
  out += "\n";
  char buf[64];
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(r, c));
      out += buf;
      out += c + 1 < m.cols ? "," : "\n";
    }
  }
}

int run_inspect_graph(const std::vector<std::string>& images, std::uint64_t seed, int batch,
                      int size, int clusters, const std::string& adjacency, double eps_degree,
                      const std::string& out_path) {
  grin::Tensor4 styles;
  std::vector<int> labels;
  if (!images.empty()) {
    std::vector<grin::Image8> loaded;
    for (const std::string& path : images) loaded.push_back(grin::read_png(path));
    const int w = grin::snap_down(loaded[0].width, 8);
    const int h = grin::snap_down(loaded[0].height, 8);
    styles = grin::Tensor4(static_cast<int>(loaded.size()), 3, h, w);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      if (loaded[i].width != w || loaded[i].height != h) {
        grin::log_info("inspect-graph: resizing '", images[i], "' to ", w, "x", h);
        loaded[i] = grin::resize_nearest(loaded[i], w, h);
      }
      const grin::Tensor4 one = grin::image_to_tensor(loaded[i]);
      std::copy(one.data.begin(), one.data.end(),
                styles.data.begin() + static_cast<std::ptrdiff_t>(one.size()) * i);
    }
  } else {
    grin::Rng rng(seed);
    grin::SyntheticBatch b = grin::generate_batch(rng, batch, size, clusters);
    styles = std::move(b.style);
    labels = std::move(b.style_clusters);
  }

  const grin::Encoder enc = grin::Encoder::make();
  const grin::Tensor4 feats = enc.forward(styles).taps.back();
  const grin::AdjacencyVariant variant =
      adjacency == "cosine" ? grin::AdjacencyVariant::cosine : grin::AdjacencyVariant::gram;
  const grin::AdjacencyMatrix adj = grin::build_adjacency(feats, variant, eps_degree);

  if (!labels.empty()) {
    std::printf("style clusters:");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::printf(" node%zu=%d", i, labels[i]);
    }
    std::printf("\n");
  }
  print_matrix("similarity", adj.a_tilde);
  std::printf("degrees:\n ");
  for (double d : adj.degree) std::printf(" %12.8f", d);
  std::printf("\n");
  print_matrix("propagation", adj.propagation);
  for (std::size_t i = 0; i < adj.degree.size(); ++i) {
    if (adj.degree[i] <= 10.0 * eps_degree) {
      std::printf("warning: node %zu has near-zero degree %.3e\n", i, adj.degree[i]);
    }
  }

  if (!out_path.empty()) {
    std::string csv;
    append_matrix_csv(csv, "similarity", adj.a_tilde);
    grin::Matrix deg(1, static_cast<int>(adj.degree.size()));
    deg.data.assign(adj.degree.begin(), adj.degree.end());
    append_matrix_csv(csv, "degrees", deg);
    append_matrix_csv(csv, "propagation", adj.propagation);
    std::FILE* f = std::fopen(out_path.c_str(), "wb");
    if (!f) throw grin::IoError("inspect-graph: cannot open '" + out_path + "' for writing");
    std::fwrite(csv.data(), 1, csv.size(), f);
    std::fclose(f);
    grin::log_info("inspect-graph: wrote ", out_path);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-smoothed instance normalization for style transfer"};
  app.require_subcommand(1);
  int rc = kOk;

  // train
  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "Train the decoder and graph weights");
  train->add_option("--steps", tf.cfg.steps, "optimizer steps")->capture_default_str();
  train->add_option("--batch", tf.cfg.batch_size, "images per batch")->capture_default_str();
  train->add_option("--size", tf.cfg.image_size, "square image size, multiple of 8")
      ->capture_default_str();
  train->add_option("--seed", tf.cfg.seed, "run seed")->capture_default_str();
  train->add_option("--lr", tf.cfg.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--lambda", tf.cfg.pipeline.weights.lambda, "style loss weight")
      ->capture_default_str();
  train->add_option("--layers", tf.cfg.graph_layers, "graph conv layers")->capture_default_str();
  train->add_option("--theta-noise", tf.cfg.theta_noise, "init noise around identity")
      ->capture_default_str();
  train->add_flag("--diagonal-theta", tf.cfg.diagonal_theta, "restrict graph weights to diagonal");
  train->add_option("--clusters", tf.cfg.style_clusters, "synthetic style clusters")
      ->capture_default_str();
  train->add_option("--adjacency", tf.adjacency, "similarity variant")
      ->check(CLI::IsMember({"gram", "cosine"}))
      ->capture_default_str();
  train->add_option("--activation", tf.activation, "between graph layers")
      ->check(CLI::IsMember({"none", "rectifier"}))
      ->capture_default_str();
  train->add_option("--eps", tf.cfg.pipeline.eps, "variance floor")->capture_default_str();
  train->add_option("--eps-degree", tf.cfg.pipeline.eps_degree, "degree clamp")
      ->capture_default_str();
  train->add_flag("--mean-reduce", tf.cfg.pipeline.weights.mean_reduce,
                  "average losses over elements instead of summing");
  train->add_flag("--freeze-target", tf.cfg.pipeline.freeze_grin_target,
                  "treat the normalization target as fully constant");
  train->add_option("--out", tf.cfg.checkpoint_path, "checkpoint path (empty: none)");
  train->add_option("--checkpoint-every", tf.cfg.checkpoint_every,
                    "also checkpoint every N steps (0: only at the end)")
      ->capture_default_str();
  tf.cfg.trace_path = "loss.csv";
  train->add_option("--trace", tf.cfg.trace_path, "loss CSV path")->capture_default_str();
  train->callback([&] { rc = run_train(tf); });

  // stylize
  std::string content_path, style_path, checkpoint_path, out_path;
  double stylize_eps = 1e-5;
  CLI::App* stylize = app.add_subcommand("stylize", "Apply a style image to a content image");
  stylize->add_option("--content", content_path, "content PNG")->required();
  stylize->add_option("--style", style_path, "style PNG")->required();
  stylize->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  stylize->add_option("--out", out_path, "output PNG")->required();
  stylize->add_option("--eps", stylize_eps, "variance floor")->capture_default_str();
  stylize->callback(
      [&] { rc = run_stylize(content_path, style_path, checkpoint_path, out_path, stylize_eps); });

  // gradcheck
  std::uint64_t gc_seed = 2;
  double gc_tol = 1e-4;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Compare recorded gradients against finite differences");
  gradcheck->add_option("--seed", gc_seed, "probe seed")->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tol, "max relative error allowed")
      ->capture_default_str();
  gradcheck->callback([&] { rc = run_gradcheck(gc_seed, gc_tol); });

  // inspect-graph
  std::vector<std::string> images;
  std::uint64_t ig_seed = 0;
  int ig_batch = 4, ig_size = 32, ig_clusters = 2;
  std::string ig_adjacency = "gram", ig_out;
  double ig_eps_degree = 1e-8;
  CLI::App* inspect =
      app.add_subcommand("inspect-graph", "Print the batch similarity graph for style inputs");
  inspect->add_option("--image", images, "style PNG (repeatable; overrides synthetic inputs)");
  inspect->add_option("--seed", ig_seed, "synthetic batch seed")->capture_default_str();
  inspect->add_option("--batch", ig_batch, "synthetic batch size")->capture_default_str();
  inspect->add_option("--size", ig_size, "synthetic image size")->capture_default_str();
  inspect->add_option("--clusters", ig_clusters, "synthetic style clusters")
      ->capture_default_str();
  inspect->add_option("--adjacency", ig_adjacency, "similarity variant")
      ->check(CLI::IsMember({"gram", "cosine"}))
      ->capture_default_str();
  inspect->add_option("--eps-degree", ig_eps_degree, "degree clamp")->capture_default_str();
  inspect->add_option("--out", ig_out, "write the three matrices to this CSV");
  inspect->callback([&] {
    rc = run_inspect_graph(images, ig_seed, ig_batch, ig_size, ig_clusters, ig_adjacency,
                           ig_eps_degree, ig_out);
  });

  // The config file is expanded into ordinary tokens before parsing; these
  // options exist so --config shows up in help and never reaches CLI11.
  std::string config_path;
  for (CLI::App* sub : {train, stylize, gradcheck, inspect}) {
    sub->add_option("--config", config_path,
                    "key=value config file; flags given on the command line win");
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_expected_max() > 1) continue;  // repeatable options accumulate
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  try {
    std::vector<std::string> args =
        expand_config(std::vector<std::string>(argv + 1, argv + argc), app);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const grin::TrainError& e) {
    grin::log_error("aborted: ", e.what());
    return kDiverged;
  } catch (const grin::GrinError& e) {
    grin::log_error(e.what());
    return kUsage;
  }
  return rc;
}
