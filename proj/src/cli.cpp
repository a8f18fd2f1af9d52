#include "octseg/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "octseg/config.hpp"
#include "octseg/dataio.hpp"
#include "octseg/error.hpp"
#include "octseg/metrics.hpp"
#include "octseg/preprocess.hpp"
#include "octseg/random.hpp"
#include "octseg/retinagraph.hpp"
#include "octseg/samplekit.hpp"
#include "octseg/trainer.hpp"

namespace fs = std::filesystem;

namespace octseg {

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string manifest;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Config load_config(const CommonOptions& common) {
  if (!common.config_path.empty() && !fs::is_regular_file(common.config_path)) {
    throw UsageError("config file " + common.config_path + " not found");
  }
  Config cfg = common.config_path.empty() ? Config{} : parse_config(common.config_path);
  if (common.seed) cfg.seed = *common.seed;
  return cfg;
}

fs::path require_out(const CommonOptions& common) {
  if (common.out_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(common.out_dir);
  return common.out_dir;
}

Manifest require_manifest(const CommonOptions& common) {
  if (common.manifest.empty()) throw UsageError("--manifest is required");
  return read_manifest(common.manifest);
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

GrayImage overlay_layers(const GrayImage& img, const LayerPair& layers) {
  GrayImage out = img;
  for (std::size_t c = 0; c < img.cols(); ++c) {
    out.at(layers.ilm.row_at[c], c) = (c % 2 == 0) ? 255 : 0;
    out.at(layers.ism.row_at[c], c) = (c % 2 == 0) ? 0 : 255;
  }
  return out;
}

void cmd_phantom(const CommonOptions& common, std::size_t count, std::size_t rows, std::size_t cols,
                 std::ostream& out) {
  const fs::path dir = require_out(common);
  const std::uint64_t seed = common.seed.value_or(0);
  Manifest manifest;
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "phantom_%03zu", i);
    const Phantom ph = gen_phantom(random_phantom_spec(rows, cols, derive_seed(seed, i)));
    const fs::path image = dir / (std::string(name) + ".pgm");
    const fs::path mask = dir / (std::string(name) + "_mask.pgm");
    write_pgm(ph.image, image);
    write_pgm(ph.mask, mask);
    manifest.records.push_back({image, mask, std::nullopt});
  }
  write_manifest(manifest, dir / "manifest.tsv");
  out << "wrote " << count << " phantoms to " << dir.string() << "\n";
}

void cmd_denoise(const CommonOptions& common, const std::string& input, std::ostream& out) {
  const Config cfg = load_config(common);
  const fs::path dir = require_out(common);
  const fs::path dst = dir / (stem_of(input) + "_denoised.pgm");
  write_pgm(denoise(read_pgm(input), cfg.sigma_d), dst);
  out << dst.string() << "\n";
}

void cmd_layers(const CommonOptions& common, const std::string& input, std::ostream& out) {
  const Config cfg = load_config(common);
  const fs::path dir = require_out(common);
  const GrayImage img = read_pgm(input);
  const GrayImage denoised = denoise(img, cfg.sigma_d);
  const LayerPair layers = segment_layers(denoised, cfg.w_min);
  const RoiMask roi = roi_mask(layers.ilm, layers.ism, img.rows(), img.cols());
  const std::string stem = stem_of(input);
  write_pgm(overlay_layers(denoised, layers), dir / (stem + "_overlay.pgm"));
  write_pgm(roi.mask, dir / (stem + "_roi.pgm"));
  std::string table = "col\tilm\tism\n";
  for (std::size_t c = 0; c < img.cols(); ++c) {
    table += std::to_string(c) + "\t" + std::to_string(layers.ilm.row_at[c]) + "\t" +
             std::to_string(layers.ism.row_at[c]) + "\n";
  }
  write_file_atomic(dir / (stem + "_layers.tsv"), table);
  out << "first path: " << (layers.first_found == LayerKind::ISM ? "ISM" : "ILM") << "\n";
}

void cmd_prepare(const CommonOptions& common, std::ostream& out) {
  const Config cfg = load_config(common);
  const fs::path dir = require_out(common);
  const Manifest manifest = require_manifest(common);
  for (const auto& rec : manifest.records) {
    const PreparedScan scan = prepare_scan(read_pgm(rec.image), cfg.ref(), cfg.prepare());
    const std::string stem = stem_of(rec.image);
    write_sample(scan.sample, dir / (stem + ".octf"));
    write_pgm(scan.roi.mask, dir / (stem + "_roi.pgm"));
  }
  out << "prepared " << manifest.records.size() << " samples\n";
}

std::vector<TrainingExample> load_examples(const Manifest& manifest, const Config& cfg) {
  std::vector<TrainingExample> examples;
  for (const auto& rec : manifest.records) {
    const Sample sample = prepare_sample(read_pgm(rec.image), cfg.ref(), cfg.prepare());
    examples.push_back(make_example(sample, read_mask_pgm(rec.mask)));
  }
  return examples;
}

void cmd_train(const CommonOptions& common, std::ostream& out) {
  const Config cfg = load_config(common);
  const fs::path dir = require_out(common);
  const Manifest manifest = require_manifest(common);
  const auto examples = load_examples(manifest, cfg);
  std::string log;
  const TrainResult result = train(examples, cfg.unet(), cfg.train(), cfg.ref(), [&](const EpochLoss& e) {
    std::ostringstream line;
    line.precision(9);
    line << "epoch=" << e.epoch << " loss=" << e.loss << "\n";
    log += line.str();
    out << line.str() << std::flush;
  });
  save_checkpoint(result.checkpoint, dir / "model.unck");
  write_file_atomic(dir / "train_log.txt", log);
}

void cmd_predict(const CommonOptions& common, const std::string& checkpoint, std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  const Config cfg = load_config(common);
  const fs::path dir = require_out(common);
  const Manifest manifest = require_manifest(common);
  Checkpoint cp = load_checkpoint(checkpoint);
  Manifest predictions;
  for (const auto& rec : manifest.records) {
    const Sample sample = prepare_sample(read_pgm(rec.image), cp.ref, cfg.prepare());
    const Prediction pred = predict(cp, sample, cfg.predict());
    const std::string stem = stem_of(rec.image);
    write_float_raster(pred.probability, dir / (stem + "_prob.octf"));
    const fs::path mask_path = dir / (stem + "_pred.pgm");
    write_pgm(pred.mask, mask_path);
    predictions.records.push_back({mask_path, rec.mask, rec.second_mask});
  }
  write_manifest(predictions, dir / "predictions.tsv");
  out << "predicted " << manifest.records.size() << " scans\n";
}

void cmd_evaluate(const CommonOptions& common, std::ostream& out) {
  const fs::path dir = require_out(common);
  const Manifest manifest = require_manifest(common);
  std::vector<ImageScore> vs_first, vs_second, vs_both;
  for (const auto& rec : manifest.records) {
    const BinaryMask pred = read_mask_pgm(rec.image);
    const BinaryMask gt1 = read_mask_pgm(rec.mask);
    const std::string name = stem_of(rec.image);
    vs_first.push_back({name, score_pair(pred, gt1)});
    if (rec.second_mask) {
      const BinaryMask gt2 = read_mask_pgm(*rec.second_mask);
      vs_second.push_back({name, score_pair(pred, gt2)});
      vs_both.push_back({name, score_pair(pred, intersect_masks({gt1, gt2}))});
    }
  }
  const EvalReport report = make_report(std::move(vs_first));
  write_file_atomic(dir / "report.txt", format_report(report));
  write_file_atomic(dir / "report.tsv", format_report_tsv(report));
  out << format_report(report);
  if (!vs_second.empty()) {
    if (vs_second.size() != manifest.records.size()) {
      throw Error(ErrorKind::BadRecord, "either every record or none names a second grader");
    }
    const EvalReport second = make_report(std::move(vs_second));
    const EvalReport both = make_report(std::move(vs_both));
    write_file_atomic(dir / "report_gt2.txt", format_report(second));
    write_file_atomic(dir / "report_gt2.tsv", format_report_tsv(second));
    write_file_atomic(dir / "report_intersection.txt", format_report(both));
    write_file_atomic(dir / "report_intersection.tsv", format_report_tsv(both));
  }
}

void cmd_iov(const CommonOptions& common, std::ostream& out) {
  const fs::path dir = require_out(common);
  const Manifest manifest = require_manifest(common);
  std::vector<double> values;
  std::string text;
  char buf[64];
  for (const auto& rec : manifest.records) {
    if (!rec.second_mask) throw Error(ErrorKind::BadRecord, "iov needs a second grader mask for " + rec.image.string());
    const double iov = grader_iov(read_mask_pgm(rec.mask), read_mask_pgm(*rec.second_mask));
    values.push_back(iov);
    std::snprintf(buf, sizeof buf, "%.6f", iov);
    text += "image=" + stem_of(rec.image) + " iov=" + buf + "\n";
  }
  const MeanStd agg = aggregate_stats(values);
  std::snprintf(buf, sizeof buf, "mean iov=%.6f std=%.6f\n", agg.mean, agg.std);
  text += buf;
  write_file_atomic(dir / "iov.txt", text);
  out << text;
}

bool is_usage_error(ErrorKind kind) {
  return kind == ErrorKind::UnknownKey || kind == ErrorKind::ParseError || kind == ErrorKind::InvalidConfig;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Intra-retinal cyst segmentation pipeline", "octseg"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions common;
  app.add_option("--config", common.config_path, "key = value configuration file");
  app.add_option("--seed", common.seed, "seed overriding the configuration");
  app.add_option("--out", common.out_dir, "output directory");
  app.add_option("--manifest", common.manifest, "tab-separated manifest");

  std::size_t count = 1, rows = 64, cols = 96;
  std::string input, checkpoint;

  auto* phantom = app.add_subcommand("phantom", "generate synthetic scans with cyst masks");
  phantom->add_option("--count", count, "number of scans")->check(CLI::PositiveNumber);
  phantom->add_option("--rows", rows, "scan height")->check(CLI::PositiveNumber);
  phantom->add_option("--cols", cols, "scan width")->check(CLI::PositiveNumber);
  auto* denoise_cmd = app.add_subcommand("denoise", "bilateral speckle reduction");
  denoise_cmd->add_option("--input", input, "input PGM")->required();
  auto* layers = app.add_subcommand("layers", "ILM / ISM extraction with overlay");
  layers->add_option("--input", input, "input PGM")->required();
  auto* prepare = app.add_subcommand("prepare", "build padded two-channel samples");
  auto* train_cmd = app.add_subcommand("train", "train the network on a manifest");
  auto* predict_cmd = app.add_subcommand("predict", "segment the scans of a manifest");
  predict_cmd->add_option("--checkpoint", checkpoint, "trained model")->required();
  auto* evaluate = app.add_subcommand("evaluate", "score predictions (pred, gt[, gt2] records)");
  auto* iov = app.add_subcommand("iov", "inter-observer Dice (image, gt1, gt2 records)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (phantom->parsed()) cmd_phantom(common, count, rows, cols, out);
    else if (denoise_cmd->parsed()) cmd_denoise(common, input, out);
    else if (layers->parsed()) cmd_layers(common, input, out);
    else if (prepare->parsed()) cmd_prepare(common, out);
    else if (train_cmd->parsed()) cmd_train(common, out);
    else if (predict_cmd->parsed()) cmd_predict(common, checkpoint, out);
    else if (evaluate->parsed()) cmd_evaluate(common, out);
    else if (iov->parsed()) cmd_iov(common, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_usage_error(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace octseg
