#include "symcanon/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "symcanon/autoencoder.hpp"
#include "symcanon/error.hpp"
#include "symcanon/image.hpp"
#include "symcanon/interp.hpp"
#include "symcanon/parallel.hpp"
#include "symcanon/rebasin.hpp"
#include "symcanon/rng.hpp"
#include "symcanon/symmetry.hpp"
#include "symcanon/training.hpp"

namespace fs = std::filesystem;

namespace symcanon {

std::string config_hash(const Json& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Config expansion.

namespace {

void append_flags(const Json& obj, const std::string& command, std::vector<std::string>& out,
                  bool top) {
  for (const auto& [key, value] : obj.items()) {
    if (value.is_object()) {
      require(top && key == command, "config: unexpected section '" + key + "'");
      append_flags(value, command, out, false);
      continue;
    }
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (value.is_boolean()) {
      out.push_back(flag + (value.get<bool>() ? "=true" : "=false"));
    } else if (value.is_string()) {
      out.push_back(flag);
      out.push_back(value.get<std::string>());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ",";
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      out.push_back(flag);
      out.push_back(joined);
    } else if (value.is_number()) {
      out.push_back(flag);
      out.push_back(value.dump());
    } else {
      throw Error("config: unsupported value for '" + key + "'");
    }
  }
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      require(i + 1 < args.size(), "--config needs a file argument");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty() || rest.empty()) return rest;
  const Json cfg = read_json_file(path);
  require(cfg.is_object(), "config " + path + ": top level must be an object");
  std::vector<std::string> out{rest.front()};
  append_flags(cfg, rest.front(), out, true);
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

// ---------------------------------------------------------------------------
// Shared helpers.

namespace {

std::size_t default_jobs() {
  if (const char* env = std::getenv("SYMCANON_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw Error("SYMCANON_JOBS must be a positive integer, got '" + std::string(env) + "'");
  }
  return 1;
}

void ensure_parent(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

Json artifact_meta(const std::string& command, const Json& config) {
  return {{"command", command}, {"config", config}, {"config_hash", config_hash(config)}};
}

void save_net(const Network& net, const std::string& path, const Json& meta) {
  ensure_parent(path);
  save_checkpoint(net, path, meta);
}

void save_json(const Json& j, const std::string& path) {
  ensure_parent(path);
  write_json_file(j, path);
}

// CSV plus a "<file>.meta.json" sidecar carrying config and hash.
void save_csv(const std::string& csv, const std::string& path, const Json& meta) {
  ensure_parent(path);
  write_text_file(csv, path);
  write_json_file(meta, path + ".meta.json");
}

GlyphClass parse_glyph(const std::string& s) {
  for (int c = 0; c < kGlyphClasses; ++c)
    if (s == glyph_name(static_cast<GlyphClass>(c)) || s == std::to_string(c))
      return static_cast<GlyphClass>(c);
  throw Error("unknown glyph '" + s + "' (expected hbar, vbar, cross, square, diagonal or 0-4)");
}

struct ImageSpec {
  std::string idx;
  std::size_t index = 0;
  std::string glyph;
  std::uint64_t glyph_seed = 0;
  std::size_t size = 16;

  void add_to(CLI::App* app) {
    app->add_option("--image", idx, "IDX3 image file");
    app->add_option("--index", index, "image index within the IDX file");
    app->add_option("--glyph", glyph, "synthetic glyph class");
    app->add_option("--glyph-seed", glyph_seed, "synthetic glyph seed");
    app->add_option("--size", size, "synthetic glyph / render size");
  }
  bool given() const { return !idx.empty() || !glyph.empty(); }
  Image load() const {
    require(idx.empty() || glyph.empty(), "give either --image or --glyph, not both");
    if (!idx.empty()) {
      std::vector<Image> images = load_idx(idx);
      require(index < images.size(), "--index " + std::to_string(index) + " out of range for " +
                                         std::to_string(images.size()) + " images");
      return images[index];
    }
    require(!glyph.empty(), "an image source is required (--image or --glyph)");
    return render_glyph(parse_glyph(glyph), size, glyph_seed);
  }
  Json to_json() const {
    return {{"image", idx}, {"index", index}, {"glyph", glyph}, {"glyph_seed", glyph_seed},
            {"size", size}};
  }
};

struct Context {
  std::ostream& out;
  std::vector<std::string> outputs;
};

// ---------------------------------------------------------------------------
// train-inr

struct TrainInrArgs {
  ImageSpec image;
  std::string arch = "2-32-32-1";
  double omega = 30.0;
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string out;
};

void run_train_inr(const TrainInrArgs& a, Context& ctx) {
  InrTrainConfig cfg;
  cfg.arch = parse_arch(a.arch);
  cfg.omega = a.omega;
  cfg.steps = a.steps;
  cfg.adam.lr = a.lr;
  const Json config = {{"image", a.image.to_json()}, {"arch", a.arch},  {"omega", a.omega},
                       {"steps", a.steps},           {"lr", a.lr},      {"seed", a.seed}};
  FitResult fr = train_inr(a.image.load(), cfg, a.seed);
  Json meta = artifact_meta("train-inr", config);
  meta["final_mse"] = fr.final_loss;
  save_net(fr.net, a.out, meta);
  ctx.outputs.push_back(a.out);
}

// ---------------------------------------------------------------------------
// build-zoo

struct BuildZooArgs {
  std::string task = "inr";
  std::size_t n = 10;
  std::size_t classes = 5;
  std::string arch;
  std::string activation = "relu";
  double omega = 30.0;
  std::size_t steps = 0;
  double lr = 0.0;
  std::size_t size = 16;
  std::size_t samples = 512;
  std::string init = "independent";
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t jobs = 1;
};

void run_build_zoo(BuildZooArgs a, Context& ctx) {
  const AeTask task = parse_task(a.task);
  const bool inr = task == AeTask::Inr;
  if (a.arch.empty()) a.arch = inr ? "2-32-32-1" : "2-16-16-" + std::to_string(a.classes);
  if (a.steps == 0) a.steps = inr ? 2000 : 500;
  if (a.lr == 0.0) a.lr = inr ? 1e-3 : 1e-2;
  if (inr) {
    require(a.classes >= 1 && a.classes <= static_cast<std::size_t>(kGlyphClasses),
            "build-zoo: --classes must be 1..5 for glyph INRs");
  } else {
    require(a.classes >= 2, "build-zoo: --classes must be >= 2 for classifiers");
  }
  require(a.init == "independent" || a.init == "shared",
          "build-zoo: --init must be independent or shared");
  const Arch arch = parse_arch(a.arch);
  Json config = {{"task", a.task},   {"n", a.n},         {"classes", a.classes},
                 {"arch", a.arch},   {"steps", a.steps}, {"lr", a.lr},
                 {"init", a.init},   {"seed", a.seed}};
  // A shared init starts every network from the draw of entry 0.
  const bool shared = a.init == "shared";
  auto train_seed = [&](std::uint64_t k) { return mix_seed(a.seed ^ 0x5eedull, shared ? 0 : k); };
  if (inr) {
    config["omega"] = a.omega;
    config["size"] = a.size;
  } else {
    config["activation"] = a.activation;
    config["samples"] = a.samples;
  }

  struct Job {
    Json entry;
    std::function<FitResult()> fit;
  };
  std::vector<Job> jobs;
  const std::uint64_t data_seed = mix_seed(a.seed, 7);
  ClsData data;
  if (inr) {
    // Same indexing as synth_glyphs: image k uses seed mix_seed(seed, k).
    for (std::size_t i = 0; i < a.n; ++i) {
      for (std::size_t c = 0; c < a.classes; ++c) {
        const std::uint64_t k = i * kGlyphClasses + c;
        const std::uint64_t gseed = mix_seed(a.seed, k);
        const std::uint64_t tseed = train_seed(k);
        const auto cls = static_cast<GlyphClass>(c);
        InrTrainConfig cfg;
        cfg.arch = arch;
        cfg.omega = a.omega;
        cfg.steps = a.steps;
        cfg.adam.lr = a.lr;
        const std::size_t size = a.size;
        jobs.push_back({{{"label", c}, {"glyph", glyph_name(cls)}, {"glyph_seed", gseed},
                         {"size", size}, {"train_seed", tseed}},
                        [=] { return train_inr(render_glyph(cls, size, gseed), cfg, tseed); }});
      }
    }
  } else {
    require(arch.widths.back() == a.classes, "build-zoo: arch output width must equal --classes");
    data = synth_blobs(a.samples, a.classes, arch.widths.front(), data_seed);
    ClsTrainConfig cfg;
    cfg.arch = arch;
    cfg.hidden = parse_activation(a.activation);
    cfg.steps = a.steps;
    cfg.adam.lr = a.lr;
    for (std::size_t i = 0; i < a.n; ++i) {
      const std::uint64_t tseed = train_seed(i);
      jobs.push_back({{{"label", -1}, {"train_seed", tseed}},
                      [&data, cfg, tseed] { return train_classifier(data, cfg, tseed); }});
    }
  }

  std::vector<FitResult> fits(jobs.size());
  parallel_for(jobs.size(), a.jobs, [&](std::size_t i) { fits[i] = jobs[i].fit(); });

  fs::create_directories(a.out_dir);
  Json entries = Json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "net_%05zu.json", i);
    Json entry = jobs[i].entry;
    entry["file"] = name;
    entry["final_loss"] = fits[i].final_loss;
    Json meta = artifact_meta("build-zoo", config);
    meta["entry"] = entry;
    save_net(fits[i].net, (fs::path(a.out_dir) / name).string(), meta);
    entries.push_back(entry);
  }
  Json manifest = artifact_meta("build-zoo", config);
  manifest["task"] = a.task;
  if (!inr)
    manifest["data"] = {{"samples", a.samples}, {"classes", a.classes}, {"seed", data_seed}};
  manifest["entries"] = entries;
  const std::string mpath = (fs::path(a.out_dir) / "manifest.json").string();
  save_json(manifest, mpath);
  ctx.outputs.push_back(mpath);
}

// ---------------------------------------------------------------------------
// orbit

struct OrbitArgs {
  std::string in;
  std::string domain = "sign_flip";
  bool perm = false;
  bool scale = false;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string transform_out;
};

void run_orbit(const OrbitArgs& a, Context& ctx) {
  const Network net = load_checkpoint(a.in);
  const ScaleDomain domain = parse_domain(a.domain);
  if (a.scale) check_domain(domain, net.hidden);
  require(a.noise >= 0.0, "orbit: --noise must be >= 0");
  const Json config = {{"in", a.in},         {"domain", a.domain}, {"perm", a.perm},
                       {"scale", a.scale},   {"noise", a.noise},   {"seed", a.seed}};
  const NetworkTransform g = sample_transform(net.arch(), domain, a.perm, a.scale, a.seed);
  Network moved = apply(g, net);
  if (a.noise > 0.0) moved = perturb(moved, a.noise, mix_seed(a.seed, 1));
  const Json meta = artifact_meta("orbit", config);
  save_net(moved, a.out, meta);
  const std::string tpath = a.transform_out.empty() ? a.out + ".transform.json" : a.transform_out;
  Json tj = meta;
  tj["transform"] = transform_to_json(g);
  save_json(tj, tpath);
  ctx.outputs.push_back(a.out);
  ctx.outputs.push_back(tpath);
}

// ---------------------------------------------------------------------------
// align

struct AlignArgs {
  std::string a, b;
  std::string mode = "perm_sign";
  std::uint64_t seed = 0;
  std::size_t max_sweeps = 100;
  std::string out;
  std::string result;
};

void run_align(const AlignArgs& a, Context& ctx) {
  const Network na = load_checkpoint(a.a);
  const Network nb = load_checkpoint(a.b);
  const AlignMode mode = parse_mode(a.mode);
  const Json config = {{"a", a.a},       {"b", a.b},
                       {"mode", a.mode}, {"seed", a.seed},
                       {"max_sweeps", a.max_sweeps}};
  CoordinateDescentOptions opts;
  opts.seed = a.seed;
  opts.max_sweeps = a.max_sweeps;
  auto [aligned, res] = align(na, nb, mode, opts);
  const Json meta = artifact_meta("align", config);
  save_net(aligned, a.out, meta);
  const std::string rpath = a.result.empty() ? a.out + ".alignment.json" : a.result;
  Json rj = meta;
  rj["alignment"] = alignment_to_json(res, mode);
  save_json(rj, rpath);
  ctx.outputs.push_back(a.out);
  ctx.outputs.push_back(rpath);
}

// ---------------------------------------------------------------------------
// interpolate

struct InterpArgs {
  std::string a, b;
  std::string task = "inr";
  std::string method = "naive";
  std::size_t points = 21;
  ImageSpec image;
  std::string reference;
  std::uint64_t probe_seed = 0;
  std::size_t samples = 512;
  std::string ae;
  std::string out;
};

void run_interpolate(const InterpArgs& a, Context& ctx) {
  const Network na = load_checkpoint(a.a);
  const Network nb = load_checkpoint(a.b);
  const AeTask task = parse_task(a.task);
  Json config = {{"a", a.a},         {"b", a.b},           {"task", a.task},
                 {"method", a.method}, {"points", a.points}, {"ae", a.ae}};
  NetLossFn loss;
  if (task == AeTask::Inr) {
    Image ref;
    if (a.image.given()) {
      require(a.reference.empty(), "interpolate: give an image source or --reference, not both");
      ref = a.image.load();
      config["image"] = a.image.to_json();
    } else {
      const Network rnet = a.reference.empty() ? na : load_checkpoint(a.reference);
      ref = render_inr(rnet, a.image.size, a.image.size);
      config["reference"] = a.reference.empty() ? a.a : a.reference;
      config["size"] = a.image.size;
    }
    loss = inr_loss(std::move(ref));
  } else {
    config["probe_seed"] = a.probe_seed;
    config["samples"] = a.samples;
    loss = classifier_loss(synth_blobs(a.samples, na.output_dim(), na.input_dim(), a.probe_seed));
  }
  BarrierCurve curve;
  if (a.ae.empty()) {
    curve = barrier_curve(na, nb, loss, a.points);
  } else {
    const AeModel model = load_ae(a.ae);
    curve = latent_interpolate(na, nb, model, loss, a.points);
  }
  Json meta = artifact_meta("interpolate", config);
  meta["kind"] = "barrier_curve";
  meta["method"] = a.method;
  meta["barrier"] = barrier(curve);
  save_csv(curve_to_csv(curve), a.out, meta);
  ctx.outputs.push_back(a.out);
}

// ---------------------------------------------------------------------------
// train-ae

struct TrainAeArgs {
  std::string zoo;
  std::string variant = "scale_sign";
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::size_t hidden_dim = 32;
  std::size_t latent_dim = 32;
  std::size_t iterations = 2;
  std::size_t max_depth = 8;
  std::string readout = "full";
  std::vector<std::size_t> decoder_hidden{64, 128};
  double lr = 1e-3;
  std::size_t warmup = 100;
  double weight_decay = 1e-2;
  double encoder_lr_scale = 0.1;
  double temperature = 0.5;
  double val_fraction = 0.1;
  std::size_t grid_size = 16;
  std::size_t probe_samples = 512;
  std::size_t limit = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string history;
  std::size_t jobs = 1;
};

void run_train_ae(const TrainAeArgs& a, Context& ctx) {
  const std::string mpath = (fs::path(a.zoo) / "manifest.json").string();
  const Json manifest = read_json_file(mpath);
  std::vector<Network> zoo;
  for (const auto& e : manifest.at("entries")) {
    if (a.limit && zoo.size() >= a.limit) break;
    zoo.push_back(load_checkpoint((fs::path(a.zoo) / e.at("file").get<std::string>()).string()));
  }
  require(!zoo.empty(), "train-ae: zoo " + a.zoo + " has no networks");

  AeConfig c;
  c.task = parse_task(manifest.at("task").get<std::string>());
  c.encoder.variant = parse_variant(a.variant);
  c.encoder.hidden_dim = a.hidden_dim;
  c.encoder.latent_dim = a.latent_dim;
  c.encoder.n_iterations = a.iterations;
  c.encoder.max_depth = a.max_depth;
  c.encoder.readout = parse_readout(a.readout);
  c.decoder_hidden = a.decoder_hidden;
  c.target_arch = zoo.front().arch();
  c.target_activation = zoo.front().hidden;
  c.adam.lr = a.lr;
  c.adam.warmup_steps = a.warmup;
  c.adam.weight_decay = a.weight_decay;
  c.encoder_lr_scale = a.encoder_lr_scale;
  c.temperature = a.temperature;
  c.epochs = a.epochs;
  c.batch_size = a.batch_size;
  c.val_fraction = a.val_fraction;
  c.grid_size = a.grid_size;
  c.probe_samples = a.probe_samples;
  c.jobs = a.jobs;
  c.seed = a.seed;

  Json config = ae_config_to_json(c);
  config["zoo"] = a.zoo;
  config["limit"] = a.limit;
  AeTrainResult res = train_ae(zoo, c);
  Json meta = artifact_meta("train-ae", config);
  meta["best_epoch"] = res.best_epoch;
  meta["train_ids"] = res.train_ids;
  meta["val_ids"] = res.val_ids;
  ensure_parent(a.out);
  save_ae(res.model, a.out, meta);
  const std::string hpath = a.history.empty() ? a.out + ".history.csv" : a.history;
  Json hmeta = artifact_meta("train-ae", config);
  hmeta["kind"] = "ae_history";
  save_csv(history_to_csv(res.history), hpath, hmeta);
  ctx.outputs.push_back(a.out);
  ctx.outputs.push_back(hpath);
}

// ---------------------------------------------------------------------------
// canonicalize

struct CanonArgs {
  std::string in;
  std::string model;
  std::string out;
  std::string latent;
  std::string net_id;
};

void run_canonicalize(const CanonArgs& a, Context& ctx) {
  require(!a.out.empty() || !a.latent.empty(), "canonicalize: give --out and/or --latent");
  const Network net = load_checkpoint(a.in);
  const AeModel model = load_ae(a.model);
  const std::string id = a.net_id.empty() ? fs::path(a.in).stem().string() : a.net_id;
  const Json config = {{"in", a.in}, {"model", a.model}, {"net_id", id}};
  const Json meta = artifact_meta("canonicalize", config);
  const Tensor z = encode_latent(net, model);
  if (!a.out.empty()) {
    save_net(decode(z, model), a.out, meta);
    ctx.outputs.push_back(a.out);
  }
  if (!a.latent.empty()) {
    std::string csv = "net_id";
    for (std::size_t i = 0; i < z.size(); ++i) csv += ",z_" + std::to_string(i);
    csv += "\n" + id;
    char buf[32];
    for (double v : z.data()) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      csv += buf;
    }
    csv += "\n";
    Json lmeta = meta;
    lmeta["kind"] = "latent";
    save_csv(csv, a.latent, lmeta);
    ctx.outputs.push_back(a.latent);
  }
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string run_dir;
  std::string out;
  std::string csv;
};

void run_report(const ReportArgs& a, Context& ctx) {
  require(fs::is_directory(a.run_dir), "report: " + a.run_dir + " is not a directory");
  std::vector<fs::path> metas;
  for (const auto& e : fs::recursive_directory_iterator(a.run_dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 14 &&
        name.compare(name.size() - 14, 14, ".csv.meta.json") == 0)
      metas.push_back(e.path());
  }
  std::sort(metas.begin(), metas.end());
  std::map<std::string, std::vector<double>> barriers;
  std::map<std::string, Json> files;
  for (const auto& m : metas) {
    const Json meta = read_json_file(m.string());
    if (meta.value("kind", "") != "barrier_curve") continue;
    std::string csv_path = m.string();
    csv_path.resize(csv_path.size() - 10);
    std::ifstream f(csv_path);
    require(static_cast<bool>(f), "report: missing curve " + csv_path);
    const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string method = meta.at("method").get<std::string>();
    barriers[method].push_back(barrier(curve_from_csv(text)));
    files[method].push_back(fs::relative(csv_path, a.run_dir).generic_string());
  }
  require(!barriers.empty(), "report: no barrier curves under " + a.run_dir);
  const Json config = {{"run_dir", a.run_dir}};
  Json rows = Json::array();
  std::string csv = "method,n,median,q25,q75\n";
  for (const auto& [method, vals] : barriers) {
    const Summary s = summarize(vals);
    rows.push_back({{"method", method},
                    {"n", vals.size()},
                    {"median", s.median},
                    {"q25", s.q25},
                    {"q75", s.q75},
                    {"barriers", vals},
                    {"files", files[method]}});
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.9g,%.9g,%.9g\n", method.c_str(), vals.size(),
                  s.median, s.q25, s.q75);
    csv += buf;
  }
  Json report = artifact_meta("report", config);
  report["methods"] = rows;
  const std::string out = a.out.empty() ? (fs::path(a.run_dir) / "report.json").string() : a.out;
  save_json(report, out);
  ctx.outputs.push_back(out);
  if (!a.csv.empty()) {
    Json meta = artifact_meta("report", config);
    meta["kind"] = "report";
    save_csv(csv, a.csv, meta);
    ctx.outputs.push_back(a.csv);
  }
}

void print_error(std::ostream& err, const std::string& command, const std::string& kind,
                 const std::string& message) {
  err << Json{{"error", {{"command", command}, {"kind", kind}, {"message", message}}}}.dump()
      << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Dispatch.

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  const std::string command = raw_args.empty() ? "" : raw_args.front();
  std::vector<std::string> args;
  std::size_t jobs = 1;
  try {
    args = expand_config(raw_args);
    jobs = default_jobs();
  } catch (const std::exception& e) {
    print_error(err, command, "config", e.what());
    return 2;
  }

  CLI::App app("Align and canonicalise small networks under their weight-space symmetries",
               "symcanon");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  auto sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    return s;
  };
  std::function<void(Context&)> action;

  TrainInrArgs ti;
  {
    CLI::App* s = sub("train-inr", "fit a SIREN to one image");
    ti.image.add_to(s);
    s->add_option("--arch", ti.arch);
    s->add_option("--omega", ti.omega);
    s->add_option("--steps", ti.steps);
    s->add_option("--lr", ti.lr);
    s->add_option("--seed", ti.seed);
    s->add_option("--out", ti.out)->required();
    s->add_option("--jobs", jobs);
    s->callback([&] { action = [&](Context& c) { run_train_inr(ti, c); }; });
  }
  BuildZooArgs bz;
  {
    CLI::App* s = sub("build-zoo", "train a population of INRs or classifiers");
    s->add_option("--task", bz.task, "inr or cls");
    s->add_option("--n", bz.n, "networks per glyph class (inr) or in total (cls)");
    s->add_option("--classes", bz.classes);
    s->add_option("--arch", bz.arch);
    s->add_option("--activation", bz.activation, "classifier activation: relu or tanh");
    s->add_option("--omega", bz.omega);
    s->add_option("--steps", bz.steps);
    s->add_option("--lr", bz.lr);
    s->add_option("--size", bz.size);
    s->add_option("--samples", bz.samples, "classifier training samples");
    s->add_option("--init", bz.init, "independent or shared initialisation across the zoo");
    s->add_option("--seed", bz.seed);
    s->add_option("--out-dir", bz.out_dir)->required();
    s->add_option("--jobs", jobs);
    s->callback([&] {
      action = [&](Context& c) {
        bz.jobs = jobs;
        run_build_zoo(bz, c);
      };
    });
  }
  OrbitArgs ob;
  {
    CLI::App* s = sub("orbit", "apply a random symmetry transform and optional noise");
    s->add_option("--in", ob.in)->required();
    s->add_option("--domain", ob.domain, "identity, sign_flip or positive");
    s->add_flag("--perm", ob.perm, "permute hidden neurons");
    s->add_flag("--scale", ob.scale, "scale hidden neurons within the domain");
    s->add_option("--noise", ob.noise, "relative perturbation sigma");
    s->add_option("--seed", ob.seed);
    s->add_option("--out", ob.out)->required();
    s->add_option("--transform-out", ob.transform_out);
    s->add_option("--jobs", jobs);
    s->callback([&] { action = [&](Context& c) { run_orbit(ob, c); }; });
  }
  AlignArgs al;
  {
    CLI::App* s = sub("align", "align network B to network A");
    s->add_option("--a", al.a)->required();
    s->add_option("--b", al.b)->required();
    s->add_option("--mode", al.mode, "perm_only or perm_sign");
    s->add_option("--seed", al.seed);
    s->add_option("--max-sweeps", al.max_sweeps);
    s->add_option("--out", al.out)->required();
    s->add_option("--result", al.result);
    s->add_option("--jobs", jobs);
    s->callback([&] { action = [&](Context& c) { run_align(al, c); }; });
  }
  InterpArgs ip;
  {
    CLI::App* s = sub("interpolate", "evaluate the loss along the path from B to A");
    s->add_option("--a", ip.a)->required();
    s->add_option("--b", ip.b)->required();
    s->add_option("--task", ip.task, "inr or cls");
    s->add_option("--method", ip.method, "label used by report");
    s->add_option("--points", ip.points);
    ip.image.add_to(s);
    s->add_option("--reference", ip.reference, "checkpoint whose rendering is the INR target");
    s->add_option("--probe-seed", ip.probe_seed, "classifier probe batch seed");
    s->add_option("--samples", ip.samples, "classifier probe batch size");
    s->add_option("--ae", ip.ae, "interpolate latents of this autoencoder instead");
    s->add_option("--out", ip.out)->required();
    s->add_option("--jobs", jobs);
    s->callback([&] { action = [&](Context& c) { run_interpolate(ip, c); }; });
  }
  TrainAeArgs ta;
  {
    CLI::App* s = sub("train-ae", "train a canonicalisation autoencoder on a zoo");
    s->add_option("--zoo", ta.zoo)->required();
    s->add_option("--variant", ta.variant, "plain, scale_sign or scale_positive");
    s->add_option("--epochs", ta.epochs);
    s->add_option("--batch-size", ta.batch_size);
    s->add_option("--hidden-dim", ta.hidden_dim);
    s->add_option("--latent-dim", ta.latent_dim);
    s->add_option("--iterations", ta.iterations);
    s->add_option("--max-depth", ta.max_depth);
    s->add_option("--readout", ta.readout, "full or last_layer");
    s->add_option("--decoder-hidden", ta.decoder_hidden)->delimiter(',');
    s->add_option("--lr", ta.lr);
    s->add_option("--warmup", ta.warmup);
    s->add_option("--weight-decay", ta.weight_decay);
    s->add_option("--encoder-lr-scale", ta.encoder_lr_scale);
    s->add_option("--temperature", ta.temperature);
    s->add_option("--val-fraction", ta.val_fraction);
    s->add_option("--grid-size", ta.grid_size);
    s->add_option("--probe-samples", ta.probe_samples);
    s->add_option("--limit", ta.limit, "use only the first N zoo entries");
    s->add_option("--seed", ta.seed);
    s->add_option("--out", ta.out)->required();
    s->add_option("--history", ta.history);
    s->add_option("--jobs", jobs);
    s->callback([&] {
      action = [&](Context& c) {
        ta.jobs = jobs;
        run_train_ae(ta, c);
      };
    });
  }
  CanonArgs cn;
  {
    CLI::App* s = sub("canonicalize", "map a network to its canonical representative");
    s->add_option("--in", cn.in)->required();
    s->add_option("--model", cn.model)->required();
    s->add_option("--out", cn.out);
    s->add_option("--latent", cn.latent, "also write the latent vector as CSV");
    s->add_option("--net-id", cn.net_id);
    s->add_option("--jobs", jobs);
    s->callback([&] { action = [&](Context& c) { run_canonicalize(cn, c); }; });
  }
  ReportArgs rp;
  {
    CLI::App* s = sub("report", "summarise barrier curves per method");
    s->add_option("--run-dir", rp.run_dir)->required();
    s->add_option("--out", rp.out);
    s->add_option("--csv", rp.csv);
    s->add_option("--jobs", jobs);
    s->callback([&] { action = [&](Context& c) { run_report(rp, c); }; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    print_error(err, command, "usage", e.what());
    return 2;
  }

  Context ctx{out, {}};
  try {
    require(jobs >= 1, "--jobs must be >= 1");
    action(ctx);
  } catch (const std::exception& e) {
    print_error(err, command, "runtime", e.what());
    return 1;
  }
  out << Json{{"command", command}, {"outputs", ctx.outputs}}.dump() << "\n";
  return 0;
}

}  // namespace symcanon
