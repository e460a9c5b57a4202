#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "steer/basis/steerable_basis.hpp"
#include "steer/cli/app.hpp"
#include "steer/error.hpp"
#include "steer/imaging/image_io.hpp"
#include "steer/imaging/phantom.hpp"
#include "steer/metrics/metrics.hpp"
#include "steer/nn/network.hpp"
#include "steer/recon/mlem.hpp"
#include "steer/recon/pipelines.hpp"
#include "steer/recon/run_output.hpp"

namespace steer::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  const ExperimentConfig& config;
  std::ostream& log;
  recon::ImageFormats formats;
};

std::string fixed(double v, int digits = 6) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
}

void prepare_out(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec || !fs::is_directory(config.out)) {
    throw Error(ErrorKind::IoFailure, "output directory " + config.out.string() + " is not writable");
  }
  write_text(config.out / "config.resolved", format_config(config));
}

imaging::ImageGrid grid_of(const ExperimentConfig& c) { return {c.size, c.size, c.pitch}; }

imaging::PhantomSpec phantom_spec(const ExperimentConfig& c) {
  imaging::PhantomSpec spec;
  spec.anti_alias = c.anti_alias;
  return spec;
}

ad::Tensor phantom_image(const ExperimentConfig& c) {
  return c.phantom == "derenzo" ? imaging::derenzo_phantom(grid_of(c), phantom_spec(c)) : imaging::brain_phantom(grid_of(c));
}

ad::Tensor read_input(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw Error(ErrorKind::IoFailure, std::string(what) + " file " + path.string() + " not found");
  auto t = imaging::read_flat(path);
  if (t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1) t = ad::Tensor::from({t.dim(2), t.dim(3)}, {t.values().begin(), t.values().end()});
  if (t.rank() != 2) throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must be a 2-D image");
  return t;
}

std::optional<ad::Tensor> reference_or_phantom(const ExperimentConfig& c) {
  if (!c.reference.empty()) return read_input(c.reference, "reference");
  if (c.input.empty()) return phantom_image(c);
  return std::nullopt;
}

std::vector<nn::Architecture> architectures(const ExperimentConfig& c) {
  if (c.network == "scnn") return {nn::Architecture::Scnn};
  if (c.network == "cnn") return {nn::Architecture::Cnn};
  return {nn::Architecture::Scnn, nn::Architecture::Cnn};
}

recon::TrainingOptions training_options(const ExperimentConfig& c, std::uint64_t seed) {
  recon::TrainingOptions o;
  o.epochs = c.epochs;
  o.seed = seed;
  o.checkpoint_every = c.checkpoint_every;
  o.adam.learning_rate = c.lr;
  return o;
}

fs::path run_dir(const ExperimentConfig& c, const std::string& label, std::uint64_t seed) {
  return c.out / label / ("seed_" + std::to_string(seed));
}

struct SummaryRow {
  std::string label;
  std::uint64_t seed = 0;
  double loss = 0.0;
  std::optional<metrics::MetricReport> report;
};

void emit_summary(const Context& ctx, const std::vector<SummaryRow>& rows) {
  std::string csv = "network,seed,final_loss,mse,ssim,psnr\n";
  ctx.log << "network  seed  final_loss      mse         ssim      psnr\n";
  for (const auto& r : rows) {
    const std::string mse = r.report ? fixed(r.report->mse, 8) : "-";
    const std::string ssim = r.report ? fixed(r.report->ssim, 4) : "-";
    const std::string psnr = !r.report ? "-" : r.report->psnr ? fixed(*r.report->psnr, 2) : "inf";
    char line[256];
    std::snprintf(line, sizeof line, "%-7s  %4llu  %-14s  %-10s  %-8s  %s\n", r.label.c_str(),
                  static_cast<unsigned long long>(r.seed), fixed(r.loss, 8).c_str(), mse.c_str(), ssim.c_str(),
                  psnr.c_str());
    ctx.log << line;
    csv += r.label + "," + std::to_string(r.seed) + "," + fixed(r.loss, 12) + "," + (r.report ? fixed(r.report->mse, 12) : "") +
           "," + (r.report ? fixed(r.report->ssim, 12) : "") + "," +
           (r.report ? (r.report->psnr ? fixed(*r.report->psnr, 12) : "inf") : "") + "\n";
  }
  if (ctx.config.seeds > 1) {
    for (const auto arch : architectures(ctx.config)) {
      std::vector<double> loss, ssim;
      for (const auto& r : rows)
        if (r.label == nn::to_string(arch)) {
          loss.push_back(r.loss);
          if (r.report) ssim.push_back(r.report->ssim);
        }
      ctx.log << "median " << nn::to_string(arch) << ": final_loss " << fixed(median(loss), 8);
      if (!ssim.empty()) ctx.log << "  ssim " << fixed(median(ssim), 4);
      ctx.log << "\n";
    }
  }
  write_text(ctx.config.out / "summary.csv", csv);
}

std::map<std::string, double> report_values(const std::optional<metrics::MetricReport>& report) {
  std::map<std::string, double> v;
  if (!report) return v;
  v["final_mse_vs_truth"] = report->mse;
  v["final_ssim_vs_truth"] = report->ssim;
  v["final_psnr_vs_truth"] = report->psnr.value_or(std::numeric_limits<double>::infinity());
  return v;
}

std::optional<metrics::MetricReport> maybe_compare(const ad::Tensor& image, const std::optional<ad::Tensor>& truth) {
  if (!truth) return std::nullopt;
  return metrics::compare(image, *truth);
}

void run_denoise(const Context& ctx) {
  const auto& c = ctx.config;
  const auto truth = reference_or_phantom(c);
  if (truth) recon::write_image(c.out / "data", "truth", *truth, ctx.formats);
  std::vector<SummaryRow> rows;
  for (std::uint64_t seed = c.seed; seed < c.seed + c.seeds; ++seed) {
    const auto noisy = c.input.empty() ? imaging::add_poisson_noise(*truth, c.counts, seed) : read_input(c.input, "input");
    recon::write_image(c.out / "data", "noisy_seed_" + std::to_string(seed), noisy, ctx.formats);
    for (const auto arch : architectures(c)) {
      auto net = nn::build_network(arch, c.order, c.width, seed);
      const auto run = recon::dip_denoise(noisy, net, training_options(c, seed), truth);
      const auto report = maybe_compare(run.output, truth);
      recon::write_run(run_dir(c, run.label, seed), run, report_values(report), ctx.formats);
      rows.push_back({run.label, seed, run.loss.empty() ? 0.0 : run.loss.back(), report});
    }
  }
  emit_summary(ctx, rows);
}

struct SinogramData {
  imaging::RadonOperator op;
  ad::Tensor sinogram;
  std::optional<ad::Tensor> truth;
};

SinogramData sinogram_data(const Context& ctx) {
  const auto& c = ctx.config;
  imaging::RadonOperator op(grid_of(c), c.angles);
  auto truth = reference_or_phantom(c);
  ad::Tensor sino = c.input.empty() ? ad::Tensor::from({op.angles(), op.detectors()}, op.forward(truth->values()))
                                    : read_input(c.input, "input sinogram");
  recon::write_image(c.out / "data", "sinogram", sino, ctx.formats);
  if (truth) recon::write_image(c.out / "data", "truth", *truth, ctx.formats);
  return {std::move(op), std::move(sino), std::move(truth)};
}

void run_reconstruct(const Context& ctx) {
  const auto& c = ctx.config;
  const auto data = sinogram_data(ctx);
  std::vector<SummaryRow> rows;
  for (std::uint64_t seed = c.seed; seed < c.seed + c.seeds; ++seed)
    for (const auto arch : architectures(c)) {
      auto net = nn::build_network(arch, c.order, c.width, seed);
      const auto run = recon::dip_reconstruct(data.sinogram, data.op, net, training_options(c, seed), data.truth);
      const auto report = maybe_compare(run.output, data.truth);
      recon::write_run(run_dir(c, run.label, seed), run, report_values(report), ctx.formats);
      rows.push_back({run.label, seed, run.loss.empty() ? 0.0 : run.loss.back(), report});
    }
  emit_summary(ctx, rows);
}

void print_contrast(const Context& ctx, const std::string& label, const ad::Tensor& image) {
  const auto& c = ctx.config;
  if (c.phantom != "derenzo" || !c.input.empty()) return;
  const auto spec = phantom_spec(c);
  const auto cr = imaging::contrast_recovery(image, grid_of(c), spec, imaging::derenzo_layout(grid_of(c), spec));
  ctx.log << "contrast recovery " << label << ":";
  for (std::size_t s = 0; s < cr.size(); ++s) ctx.log << " " << spec.rod_diameters[s] << "mm=" << fixed(cr[s], 3);
  ctx.log << "\n";
}

void run_mlem(const Context& ctx) {
  const auto& c = ctx.config;
  const auto data = sinogram_data(ctx);
  const auto iterates = recon::mlem(data.sinogram, data.op, c.mlem_iters);
  std::string csv = data.truth ? "iteration,log_likelihood,mse,ssim\n" : "iteration,log_likelihood\n";
  for (std::size_t k = 0; k < iterates.size(); ++k) {
    csv += std::to_string(k) + "," + fixed(recon::poisson_log_likelihood(data.sinogram, data.op, iterates[k]), 10);
    if (data.truth) {
      const auto r = metrics::compare(iterates[k], *data.truth);
      csv += "," + fixed(r.mse, 12) + "," + fixed(r.ssim, 12);
    }
    csv += "\n";
  }
  write_text(c.out / "likelihood.csv", csv);
  recon::write_image(c.out, "mlem", iterates.back(), ctx.formats);
  ctx.log << "mlem " << c.mlem_iters << " iterations, log-likelihood "
          << fixed(recon::poisson_log_likelihood(data.sinogram, data.op, iterates.back()), 6) << "\n";
  if (data.truth) {
    const auto r = metrics::compare(iterates.back(), *data.truth);
    ctx.log << "mse " << fixed(r.mse, 8) << "  ssim " << fixed(r.ssim, 4) << "\n";
  }
  print_contrast(ctx, "mlem", iterates.back());
}

void run_assisted(const Context& ctx) {
  const auto& c = ctx.config;
  const auto data = sinogram_data(ctx);
  std::vector<SummaryRow> rows;
  bool mlem_written = false;
  for (std::uint64_t seed = c.seed; seed < c.seed + c.seeds; ++seed)
    for (const auto arch : architectures(c)) {
      auto net = nn::build_network(arch, c.order, c.width, seed);
      const auto result = recon::scnn_assisted_recon(data.sinogram, data.op, net, c.mlem_iters,
                                                     training_options(c, seed), data.truth);
      if (!mlem_written) {
        recon::write_image(c.out, "mlem", result.mlem_image, ctx.formats);
        const auto r = maybe_compare(result.mlem_image, data.truth);
        if (r) ctx.log << "mlem-" << c.mlem_iters << ": mse " << fixed(r->mse, 8) << "  ssim " << fixed(r->ssim, 4) << "\n";
        print_contrast(ctx, "mlem", result.mlem_image);
        mlem_written = true;
      }
      const auto& run = result.refined;
      auto report = maybe_compare(run.output, data.truth);
      auto values = report_values(report);
      if (const auto r = maybe_compare(result.mlem_image, data.truth)) values["mlem_ssim_vs_truth"] = r->ssim;
      recon::write_run(run_dir(c, run.label, seed), run, values, ctx.formats);
      print_contrast(ctx, run.label + " seed " + std::to_string(seed), run.output);
      rows.push_back({run.label, seed, run.loss.empty() ? 0.0 : run.loss.back(), report});
    }
  emit_summary(ctx, rows);
}

void run_generalize(const Context& ctx) {
  const auto& c = ctx.config;
  const auto train = recon::make_pairs(recon::radial_dataset(c.train_images, c.size, c.seed), c.counts, c.seed);
  const auto test = recon::make_pairs(recon::ellipse_dataset(c.test_images, c.size, c.seed + 1), c.counts,
                                      c.seed + 1000);
  const auto rotated = recon::rotate_pairs(test, c.test_rotation);
  for (std::size_t k = 0; k < test.size(); ++k) {
    recon::write_image(c.out / "data", "test_clean_" + std::to_string(k), test[k].clean, ctx.formats);
    recon::write_image(c.out / "data", "test_noisy_" + std::to_string(k), test[k].noisy, ctx.formats);
  }
  std::string csv = "network,seed,image,mse,ssim,mse_rotated,ssim_rotated,ssim_gap,output_rotation_error\n";
  for (std::uint64_t seed = c.seed; seed < c.seed + c.seeds; ++seed)
    for (const auto arch : architectures(c)) {
      auto net = nn::build_network(arch, c.order, c.width, seed);
      auto result = recon::generalization_experiment(train, test, net, training_options(c, seed));
      const auto dir = run_dir(c, result.training.label, seed);
      std::map<std::string, double> values{{"test_loss", result.test_loss}};
      double worst_gap = 0.0, worst_rot = 0.0;
      ctx.log << result.training.label << " seed " << seed << ": test image  ssim  ssim_rotated  gap  output_rotation_error\n";
      for (std::size_t k = 0; k < test.size(); ++k) {
        const auto out_rot = recon::predict(net, rotated[k].noisy);
        const auto rot = metrics::compare(out_rot, rotated[k].clean);
        const auto& base = result.test_metrics[k];
        const double gap = std::abs(rot.ssim - base.ssim);
        const double consistency = recon::quarter_turn_consistency(net, test[k].noisy, c.test_rotation);
        worst_gap = std::max(worst_gap, gap);
        worst_rot = std::max(worst_rot, consistency);
        ctx.log << "  " << k << "  " << fixed(base.ssim, 6) << "  " << fixed(rot.ssim, 6) << "  " << fixed(gap, 9) << "  "
                << fixed(consistency, 9) << "\n";
        csv += result.training.label + "," + std::to_string(seed) + "," + std::to_string(k) + "," + fixed(base.mse, 12) +
               "," + fixed(base.ssim, 12) + "," + fixed(rot.mse, 12) + "," + fixed(rot.ssim, 12) + "," +
               fixed(gap, 12) + "," + fixed(consistency, 12) + "\n";
        recon::write_image(dir / "test", "output_" + std::to_string(k), result.test_outputs[k], ctx.formats);
        recon::write_image(dir / "test", "output_rotated_" + std::to_string(k), out_rot, ctx.formats);
      }
      values["max_ssim_gap"] = worst_gap;
      values["max_output_rotation_error"] = worst_rot;
      recon::write_run(dir, result.training, values, ctx.formats);
    }
  write_text(c.out / "generalization.csv", csv);
}

void run_phantom(const Context& ctx) {
  const auto& c = ctx.config;
  const auto image = phantom_image(c);
  recon::write_image(c.out, c.phantom, image, ctx.formats);
  auto v = std::vector<double>(image.values().begin(), image.values().end());
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  const std::set<double> distinct(v.begin(), v.end());
  ctx.log << c.phantom << " " << c.size << "x" << c.size << " pitch " << c.pitch << " mm: min " << lo << " max " << hi
          << " distinct values " << distinct.size() << "\n";
  if (c.phantom == "derenzo") {
    std::vector<double> nonzero;
    for (double x : v)
      if (x > 0.0) nonzero.push_back(x);
    ctx.log << "max/background ratio " << hi / median(nonzero) << "\n";
    const auto layout = imaging::derenzo_layout(grid_of(c), phantom_spec(c));
    const auto spec = phantom_spec(c);
    for (std::size_t s = 0; s < spec.rod_diameters.size(); ++s) {
      std::size_t count = 0;
      for (const auto& rod : layout.rods) count += rod.sector == static_cast<int>(s);
      ctx.log << "  sector " << s << ": " << spec.rod_diameters[s] << " mm, " << count << " rods\n";
    }
  }
}

groups::Representation parse_rep(const std::string& text, int order) {
  if (text == "trivial") return groups::Representation::trivial(order);
  if (text == "regular") return groups::Representation::regular(order);
  return groups::Representation::irrep(order, std::stoi(text.substr(5)));
}

void run_basis(const Context& ctx) {
  const auto& c = ctx.config;
  const auto rin = parse_rep(c.rep_in, c.order), rout = parse_rep(c.rep_out, c.order);
  const auto grid = c.grid == "cartesian" ? basis::cartesian_grid(c.kernel, c.order) : basis::polar_grid(c.kernel, c.order);
  const auto b = basis::solve_basis_nullspace(rin, rout, grid);
  const double residual = basis::verify_steerability(b);
  const double defect = basis::orthonormality_defect(b);
  ctx.log << "C" << c.order << " " << c.rep_in << " -> " << c.rep_out << ", kernel " << c.kernel << ", " << c.grid
          << " grid (" << grid.size() << " samples)\n";
  ctx.log << "dimension " << b.size() << "\n";
  ctx.log << "effective cartesian elements " << b.effective_size() << "\n";
  ctx.log << "steerability residual " << residual << "\n";
  ctx.log << "orthonormality defect " << defect << "\n";
  const std::size_t s = static_cast<std::size_t>(c.kernel);
  std::vector<double> stack;
  for (Eigen::Index r = 0; r < b.cartesian().cols(); ++r)
    for (Eigen::Index i = 0; i < b.cartesian().rows(); ++i) stack.push_back(b.cartesian()(i, r));
  if (b.size() > 0) {
    imaging::write_flat(c.out / "basis.bin",
                        ad::Tensor::from({b.size(), static_cast<std::size_t>(b.d_out()), static_cast<std::size_t>(b.d_in()), s, s},
                                         std::move(stack)));
  }
}

void run_audit(const Context& ctx) {
  const auto& c = ctx.config;
  const auto image = c.input.empty() ? phantom_image(c) : read_input(c.input, "input");
  const std::size_t n = image.dim(0);
  const auto x = recon::as_batch(image);
  std::string csv = "network,element,angle_deg,equivariance_error\n";
  for (const auto arch : architectures(c)) {
    const auto net = nn::build_network(arch, c.order, c.width, c.seed);
    const auto label = net.label();
    ctx.log << label << " equivariance error over C" << c.order << ":\n";
    std::vector<double> tiles(n * n * static_cast<std::size_t>(c.order));
    for (int k = 0; k < c.order; ++k) {
      const groups::GroupElement g(c.order, k);
      const double err = nn::equivariance_error(net, x, g);
      const double deg = 360.0 * k / c.order;
      ctx.log << "  g" << k << " (" << fixed(deg, 1) << " deg)  " << err << "\n";
      csv += label + "," + std::to_string(k) + "," + fixed(deg, 3) + "," + fixed(err, 15) + "\n";
      const auto y = net.forward(nn::rotate_field(x, net.input_field(c.order), g));
      std::copy(y.values().begin(), y.values().end(), tiles.begin() + static_cast<std::ptrdiff_t>(k * n * n));
    }
    const auto stack = ad::Tensor::from({static_cast<std::size_t>(c.order), n, n}, tiles);
    imaging::write_flat(c.out / (label + "_actions.bin"), stack);
    if (ctx.formats.pgm) {
      std::vector<double> row(n * n * static_cast<std::size_t>(c.order));
      const std::size_t wide = n * static_cast<std::size_t>(c.order);
      for (std::size_t k = 0; k < static_cast<std::size_t>(c.order); ++k)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) row[i * wide + k * n + j] = tiles[(k * n + i) * n + j];
      imaging::write_pgm16(c.out / (label + "_actions.pgm"), ad::Tensor::from({n, wide}, std::move(row)));
    }
  }
  write_text(c.out / "audit.csv", csv);
}

void run_metrics(const Context& ctx) {
  const auto& c = ctx.config;
  const auto a = read_input(c.input, "input"), b = read_input(c.reference, "reference");
  const auto r = metrics::compare(a, b);
  ctx.log << "mse " << fixed(r.mse, 10) << "\nssim " << fixed(r.ssim, 6) << "\npsnr "
          << (r.psnr ? fixed(*r.psnr, 4) : std::string("inf")) << "\ndynamic_range " << fixed(r.dynamic_range, 6) << "\n";
}

}  // namespace

void run(const ExperimentConfig& config, std::ostream& log) {
  if (!config.command) throw Error(ErrorKind::InvalidArgument, "no subcommand given");
  prepare_out(config);
  const Context ctx{config, log, {config.pgm, config.csv}};
  switch (*config.command) {
    case Command::Denoise: return run_denoise(ctx);
    case Command::Reconstruct: return run_reconstruct(ctx);
    case Command::Mlem: return run_mlem(ctx);
    case Command::Assisted: return run_assisted(ctx);
    case Command::Generalize: return run_generalize(ctx);
    case Command::Phantom: return run_phantom(ctx);
    case Command::Basis: return run_basis(ctx);
    case Command::Audit: return run_audit(ctx);
    case Command::Metrics: return run_metrics(ctx);
  }
}

}  // namespace steer::cli
