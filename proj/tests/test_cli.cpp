#include <fstream>
#include <sstream>

#include "octseg/cli.hpp"
#include "octseg/config.hpp"
#include "octseg/dataio.hpp"
#include "support.hpp"

using namespace octseg;
using testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run octseg_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::filesystem::path> listing(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("config defaults") {
  const Config cfg = parse_config_text("");
  CHECK(cfg.sigma_d == 2.0);
  CHECK(cfg.w_min == 1e-5);
  CHECK(cfg.ref_rows == 640);
  CHECK(cfg.ref_cols == 1024);
  CHECK(cfg.base_channels == 16);
  CHECK(cfg.aspp_rates == std::vector<int>{1, 2, 4, 8, 16});
  CHECK(cfg.batch_size == 10);
  CHECK(cfg.epochs == 100);
  CHECK(cfg.learning_rate == 1e-3);
  CHECK(cfg.threshold == 0.5);
  CHECK(cfg.roi_clamp);
  CHECK(cfg.unet().dropout == std::vector<double>{0.1, 0.1, 0.2, 0.2});
  CHECK(cfg.unet().resolved_bottleneck() == 128);
}

TEST_CASE("config overrides and errors") {
  const Config lr = parse_config_text("learning_rate = 0.01\n");
  CHECK(lr.learning_rate == 0.01);
  Config expected;
  expected.learning_rate = 0.01;
  CHECK(lr.train().adam.learning_rate == 0.01);
  CHECK(lr.epochs == expected.epochs);
  CHECK(lr.base_channels == expected.base_channels);

  const Config many = parse_config_text(
      "# desk run\n\naspp_rates = 1, 2,4\ndropout = 0.1,0.1,0.2,0.2\nroi_clamp = off\nseed = 42\nref_rows=64\n");
  CHECK(many.aspp_rates == std::vector<int>{1, 2, 4});
  CHECK_FALSE(many.roi_clamp);
  CHECK(many.seed == 42);
  CHECK(many.ref().rows == 64);

  CHECK_ERROR_KIND(parse_config_text("foo = 1"), ErrorKind::UnknownKey);
  CHECK_ERROR_KIND(parse_config_text("epochs = many"), ErrorKind::ParseError);
  CHECK_ERROR_KIND(parse_config_text("epochs = 3.5"), ErrorKind::ParseError);
  CHECK_ERROR_KIND(parse_config_text("roi_clamp = maybe"), ErrorKind::ParseError);
  CHECK_ERROR_KIND(parse_config_text("just words"), ErrorKind::ParseError);

  TempDir dir;
  write_text(dir / "c.cfg", "");
  CHECK(parse_config(dir / "c.cfg").epochs == 100);
}

TEST_CASE("phantom subcommand writes pairs and a manifest") {
  TempDir dir;
  const auto out = dir / "d";
  const Run r = octseg_run({"phantom", "--count", "5", "--seed", "1", "--out", out.string()});
  CHECK(r.code == 0);
  const Manifest m = read_manifest(out / "manifest.tsv");
  CHECK(m.records.size() == 5);
  for (const auto& rec : m.records) {
    CHECK(read_pgm(rec.image).rows() == 64);
    CHECK(read_mask_pgm(rec.mask).cols() == 96);
  }
  CHECK(listing(out).size() == 11);

  const auto again = dir / "e";
  CHECK(octseg_run({"phantom", "--count", "5", "--seed", "1", "--out", again.string()}).code == 0);
  for (int i = 0; i < 5; ++i) {
    const std::string name = "phantom_00" + std::to_string(i) + ".pgm";
    CHECK(read_file(out / name) == read_file(again / name));
  }
}

TEST_CASE("usage errors exit with 2") {
  Run r = octseg_run({"bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(octseg_run({}).code == 2);
  CHECK(octseg_run({"phantom", "--count", "2"}).code == 2);
  CHECK(octseg_run({"phantom", "--count", "x", "--out", "/tmp"}).code == 2);
  CHECK(octseg_run({"predict", "--manifest", "m.tsv", "--out", "/tmp"}).code == 2);

  TempDir dir;
  write_text(dir / "bad.cfg", "foo = 1\n");
  r = octseg_run({"prepare", "--config", (dir / "bad.cfg").string(), "--out", (dir / "o").string(), "--manifest",
                  (dir / "m.tsv").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("UnknownKey") != std::string::npos);
  r = octseg_run({"prepare", "--config", (dir / "missing.cfg").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(octseg_run({"phantom", "--help"}).code == 0);
}

TEST_CASE("data errors exit with 1") {
  TempDir dir;
  Run r = octseg_run({"prepare", "--manifest", (dir / "none.tsv").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("MissingFile") != std::string::npos);
  write_pgm(GrayImage(20, 20, 100), dir / "flat.pgm");
  r = octseg_run({"layers", "--input", (dir / "flat.pgm").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("NoLayerContrast") != std::string::npos);
}

TEST_CASE("denoise and layers subcommands") {
  TempDir dir;
  PhantomSpec spec;
  spec.seed = 4;
  const Phantom ph = gen_phantom(spec);
  write_pgm(ph.image, dir / "scan.pgm");
  const auto out = dir / "o";
  CHECK(octseg_run({"denoise", "--input", (dir / "scan.pgm").string(), "--out", out.string()}).code == 0);
  CHECK(read_pgm(out / "scan_denoised.pgm").rows() == spec.rows);

  const Run r = octseg_run({"layers", "--input", (dir / "scan.pgm").string(), "--out", out.string()});
  CHECK(r.code == 0);
  const GrayImage overlay = read_pgm(out / "scan_overlay.pgm");
  const std::string table = read_file(out / "scan_layers.tsv");
  std::istringstream in(table);
  std::string header;
  std::getline(in, header);
  CHECK(header == "col\tilm\tism");
  std::size_t col, ilm, ism, n = 0;
  while (in >> col >> ilm >> ism) {
    CHECK(overlay.at(ilm, col) == (col % 2 == 0 ? 255 : 0));
    CHECK(overlay.at(ism, col) == (col % 2 == 0 ? 0 : 255));
    CHECK(std::abs(long(ilm) - long(spec.ilm_row)) <= 1);
    CHECK(std::abs(long(ism) - long(spec.ism_row)) <= 1);
    ++n;
  }
  CHECK(n == spec.cols);
  CHECK(read_mask_pgm(out / "scan_roi.pgm").count() > 0);
}

TEST_CASE("evaluate on perfect predictions and iov") {
  TempDir dir;
  const auto data = dir / "data";
  CHECK(octseg_run({"phantom", "--count", "3", "--seed", "2", "--out", data.string()}).code == 0);
  std::string perfect, graders;
  for (int i = 0; i < 3; ++i) {
    const std::string m = "phantom_00" + std::to_string(i) + "_mask.pgm";
    perfect += m + "\t" + m + "\n";
    graders += "phantom_00" + std::to_string(i) + ".pgm\t" + m + "\t" + m + "\n";
  }
  write_text(data / "perfect.tsv", perfect);
  write_text(data / "graders.tsv", graders);

  const auto out = dir / "eval";
  Run r = octseg_run({"evaluate", "--manifest", (data / "perfect.tsv").string(), "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(read_file(out / "report.txt").find("mean dice=1.000000 std=0.000000") != std::string::npos);
  CHECK(std::filesystem::exists(out / "report.tsv"));
  CHECK_FALSE(std::filesystem::exists(out / "report_gt2.txt"));

  r = octseg_run({"iov", "--manifest", (data / "graders.tsv").string(), "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("image=phantom_000 iov=1.000000") != std::string::npos);
  CHECK(r.out.find("mean iov=1.000000 std=0.000000") != std::string::npos);
  CHECK(octseg_run({"iov", "--manifest", (data / "perfect.tsv").string(), "--out", out.string()}).code == 1);
}

TEST_CASE("full pipeline is reproducible and stays inside --out") {
  TempDir dir;
  const auto data = dir / "data";
  CHECK(octseg_run({"phantom", "--count", "4", "--rows", "32", "--cols", "48", "--seed", "3", "--out", data.string()})
            .code == 0);
  write_text(dir / "tiny.cfg",
             "ref_rows = 32\nref_cols = 48\nbase_channels = 2\ndepth = 2\naspp_rates = 1,2\nepochs = 2\n"
             "batch_size = 2\n");
  const std::string cfg = (dir / "tiny.cfg").string(), manifest = (data / "manifest.tsv").string();

  auto pipeline = [&](const std::filesystem::path& root) {
    CHECK(octseg_run({"prepare", "--config", cfg, "--manifest", manifest, "--out", (root / "prep").string()}).code == 0);
    CHECK(octseg_run({"train", "--config", cfg, "--manifest", manifest, "--seed", "5", "--out", (root / "model").string()})
              .code == 0);
    CHECK(octseg_run({"predict", "--config", cfg, "--manifest", manifest, "--checkpoint",
                      (root / "model" / "model.unck").string(), "--out", (root / "pred").string()})
              .code == 0);
    CHECK(octseg_run({"evaluate", "--manifest", (root / "pred" / "predictions.tsv").string(), "--out",
                      (root / "eval").string()})
              .code == 0);
  };
  const auto before = listing(data);
  pipeline(dir / "run1");
  pipeline(dir / "run2");
  CHECK(listing(data) == before);

  CHECK(std::filesystem::exists(dir / "run1" / "prep" / "phantom_000.octf"));
  CHECK(std::filesystem::exists(dir / "run1" / "prep" / "phantom_000.octf.txt"));
  const std::string log = read_file(dir / "run1" / "model" / "train_log.txt");
  CHECK(log.rfind("epoch=1 loss=", 0) == 0);
  CHECK(log.find("epoch=2 loss=") != std::string::npos);
  for (const char* f : {"model/model.unck", "model/train_log.txt", "pred/phantom_001_prob.octf",
                        "pred/phantom_001_pred.pgm", "eval/report.txt", "eval/report.tsv"}) {
    CHECK_MESSAGE(read_file(dir / "run1" / f) == read_file(dir / "run2" / f), f);
  }
}
