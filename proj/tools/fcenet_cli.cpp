#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcenet/checkpoint.hpp"
#include "fcenet/freq_analysis.hpp"
#include "fcenet/gradcheck_suite.hpp"
#include "fcenet/image_io.hpp"
#include "fcenet/metrics.hpp"
#include "fcenet/run_config.hpp"

namespace fs = std::filesystem;
using namespace fcenet;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2 };

// Bad arguments or unusable inputs; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    bool deterministic = false;

    RunConfig run_config() const { return config.empty() ? RunConfig{} : load_run_config(config); }
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void require_same_size(const Tensor& a, const Tensor& b, const char* what) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw UsageError(std::string(what) + ": image sizes differ (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
    }
}

Tensor as_rgb(const Tensor& t) { return t.channels() == 3 ? t : replicate_channels(to_gray(t), 3); }

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
    int synthetic = 0;
    int size = 64;
    std::string nir, noisy, clean, out;
};

int run_analyze(const Globals& g, const AnalyzeArgs& a) {
    const bool from_files = !a.nir.empty() || !a.noisy.empty() || !a.clean.empty();
    if (from_files == (a.synthetic > 0)) throw UsageError("analyze: give either --synthetic N or --nir/--noisy/--clean");
    if (from_files && (a.nir.empty() || a.noisy.empty() || a.clean.empty())) {
        throw UsageError("analyze: --nir, --noisy and --clean are all required");
    }

    // Analysis default: additive gaussian noise without darkening, unless a
    // config file supplies the noise model.
    NoiseSpec spec;
    int size = a.size;
    if (!g.config.empty()) {
        const RunConfig rc = g.run_config();
        spec = rc.noise(0);
        size = rc.data_size;
    } else {
        spec.kind = NoiseKind::gaussian;
        spec.sigma = 25.0;
        spec.darken = false;
    }

    std::vector<std::pair<Tensor, Tensor>> noisy_pairs, nir_pairs;
    if (from_files) {
        const Tensor clean = as_rgb(read_png(a.clean));
        const Tensor noisy = as_rgb(read_png(a.noisy));
        const Tensor nir = to_gray(read_png(a.nir));
        require_same_size(noisy, clean, "analyze");
        require_same_size(nir, clean, "analyze");
        noisy_pairs.emplace_back(noisy, clean);
        nir_pairs.emplace_back(replicate_channels(nir, 3), clean);
    } else {
        for (int i = 0; i < a.synthetic; ++i) {
            const SceneTriple t = synth_triple(derive_seed(g.seed, static_cast<std::uint64_t>(i)), size, size, spec);
            noisy_pairs.emplace_back(t.noisy, t.clean);
            nir_pairs.emplace_back(replicate_channels(t.nir, 3), t.clean);
        }
    }

    const auto grid = standard_cutoff_grid();
    std::vector<CorrelationCurve> noisy_curves, nir_curves;
    std::vector<double> rho_noisy, rho_nir;
    for (std::size_t i = 0; i < noisy_pairs.size(); ++i) {
        noisy_curves.push_back(correlation_curve(noisy_pairs[i].first, noisy_pairs[i].second, grid, "noisy_vs_clean"));
        nir_curves.push_back(correlation_curve(nir_pairs[i].first, nir_pairs[i].second, grid, "nir_vs_clean"));
        rho_noisy.push_back(spearman(grid, noisy_curves.back().similarities));
        rho_nir.push_back(spearman(grid, nir_curves.back().similarities));
    }
    const std::vector<CorrelationCurve> curves = {mean_curve(noisy_curves, "noisy_vs_clean"),
                                                  mean_curve(nir_curves, "nir_vs_clean")};
    export_curve_csv(curves, a.out);
    std::printf("images: %zu\n", noisy_pairs.size());
    std::printf("spearman noisy_vs_clean: %.6f\n", median(rho_noisy));
    std::printf("spearman nir_vs_clean: %.6f\n", median(rho_nir));
    std::printf("wrote %s\n", a.out.c_str());
    return kOk;
}

// ---- simulate-noise --------------------------------------------------------

struct SimulateArgs {
    std::string in, out, scene;
    int size = 0;
};

int run_simulate(const Globals& g, const SimulateArgs& a) {
    const RunConfig rc = g.run_config();
    NoiseSpec spec = rc.noise(g.seed);
    if (!a.scene.empty()) {
        if (!a.in.empty() || !a.out.empty()) throw UsageError("simulate-noise: --scene excludes --in/--out");
        const int size = a.size > 0 ? a.size : rc.data_size;
        const SceneTriple t = synth_triple(g.seed, size, size, spec);
        fs::create_directories(a.scene);
        write_png((fs::path(a.scene) / "clean.png").string(), t.clean);
        write_png((fs::path(a.scene) / "nir.png").string(), t.nir);
        write_png((fs::path(a.scene) / "noisy.png").string(), t.noisy);
        std::printf("wrote clean.png, nir.png, noisy.png to %s\n", a.scene.c_str());
        return kOk;
    }
    if (a.in.empty() || a.out.empty()) throw UsageError("simulate-noise: need --in and --out, or --scene DIR");
    Tensor image = read_png(a.in);
    CounterRng rng(g.seed, 0x73696d);
    if (spec.darken) image = darken(image, spec.darken_lo, spec.darken_hi, rng);
    write_png(a.out, add_noise(image, spec, rng));
    std::printf("wrote %s\n", a.out.c_str());
    return kOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string out, metrics, data;
};

std::vector<SceneTriple> load_triples(const std::string& dir, const RunConfig& rc) {
    const fs::path clean_dir = fs::path(dir) / "clean";
    const fs::path nir_dir = fs::path(dir) / "nir";
    if (!fs::is_directory(clean_dir) || !fs::is_directory(nir_dir)) {
        throw UsageError("train: data directory needs clean/ and nir/ subdirectories: " + dir);
    }
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(clean_dir))
        if (e.path().extension() == ".png") names.push_back(e.path().filename());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw UsageError("train: no PNG files in " + clean_dir.string());

    std::vector<SceneTriple> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!fs::exists(nir_dir / names[i])) throw UsageError("train: missing NIR image for " + names[i].string());
        SceneTriple t;
        t.seed = derive_seed(rc.data_seed, i);
        t.clean = as_rgb(read_png((clean_dir / names[i]).string()));
        t.nir = to_gray(read_png((nir_dir / names[i]).string()));
        require_same_size(t.nir, t.clean, names[i].string().c_str());
        const NoiseSpec spec = rc.noise(t.seed);
        CounterRng rng(t.seed, 0x6e6f697365);
        if (spec.darken) t.clean = darken(t.clean, spec.darken_lo, spec.darken_hi, rng);
        t.noisy = add_noise(t.clean, spec, rng);
        out.push_back(std::move(t));
    }
    return out;
}

int run_train(const Globals& g, const TrainArgs& a) {
    const RunConfig rc = g.run_config();
    const std::vector<SceneTriple> data = a.data.empty() ? synthetic_triples(rc) : load_triples(a.data, rc);
    const SceneTriple held = held_out_triple(rc);

    ModelWeights weights(rc.model());
    weights.init(g.seed);
    const TrainConfig tc = rc.train(g.seed);
    std::vector<MetricRow> log;
    auto on_abort = [&](const ModelWeights& w, const OptimState& st) { write_checkpoint(a.out, w, &st); };
    TrainResult r;
    try {
        r = train_loop(weights, data, held, tc, on_abort);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "train: %s; last finite weights saved to %s\n", e.what(), a.out.c_str());
        return kFailure;
    }
    write_checkpoint(a.out, weights, &r.optim);
    write_file_atomic(a.metrics, format_metrics_csv(r.log));
    const EvalResult e = evaluate(weights, data, tc.loss);
    std::printf("steps %ld  loss %.6f -> %.6f (ratio %.4f)\n", tc.steps, r.initial_loss, r.final_loss,
                r.initial_loss > 0.0 ? r.final_loss / r.initial_loss : 0.0);
    std::printf("train psnr: noisy %.3f dB, output %.3f dB\n", e.psnr_noisy, e.psnr_out);
    std::printf("wrote %s and %s\n", a.out.c_str(), a.metrics.c_str());
    return kOk;
}

// ---- denoise ---------------------------------------------------------------

struct DenoiseArgs {
    std::string checkpoint, noisy, nir, out, reference;
};

int run_denoise(const Globals&, const DenoiseArgs& a) {
    const LoadedCheckpoint ck = read_checkpoint(a.checkpoint);
    const ModelConfig& mc = ck.weights.config();
    const Tensor noisy = read_png(a.noisy);
    const Tensor nir = to_gray(read_png(a.nir));
    if (noisy.channels() != 3) throw UsageError("denoise: noisy image must be RGB");
    require_same_size(nir, noisy, "denoise");
    if (noisy.height() % mc.patch_height != 0 || noisy.width() % mc.patch_width != 0) {
        throw UsageError("denoise: image is " + std::to_string(noisy.height()) + "x" + std::to_string(noisy.width()) +
                         " but must be a multiple of the model patch size " + std::to_string(mc.patch_height) + "x" +
                         std::to_string(mc.patch_width));
    }
    Tensor out = denoise_image(noisy, nir, ck.weights);
    if (!a.reference.empty()) {
        const Tensor ref = as_rgb(read_png(a.reference));
        require_same_size(ref, noisy, "denoise");
        std::printf("noisy:  psnr %.3f dB  ssim %.4f\n", psnr(noisy, ref), ssim(noisy, ref));
        std::printf("output: psnr %.3f dB  ssim %.4f\n", psnr(out, ref), ssim(out, ref));
    }
    write_png(a.out, out);
    std::printf("wrote %s\n", a.out.c_str());
    return kOk;
}

// ---- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
    std::string module = "all";
    bool inject_fault = false;
};

int run_gradcheck(const Globals& g, const GradcheckArgs& a) {
    if (a.inject_fault) ag::set_conv_weight_grad_fault(2.0);
    const auto results = run_gradcheck_suite(a.module, g.seed);
    std::fputs(format_gradcheck_table(results).c_str(), stdout);
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : results) {
        ok = ok && r.report.passed();
        worst = std::max(worst, r.report.max_rel_error());
    }
    std::printf("max relative error %.3e: %s\n", worst, ok ? "PASS" : "FAIL");
    return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fcenet: NIR-guided low-light denoising toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random choice");
    app.add_option("--config", g.config, "key=value run configuration file");
    app.add_flag("--deterministic", g.deterministic, "Single-threaded, bit-reproducible execution");

    AnalyzeArgs aa;
    auto* analyze = app.add_subcommand("analyze", "Frequency-band similarity curves (noisy/NIR vs clean)");
    analyze->add_option("--synthetic", aa.synthetic, "Number of synthetic triples");
    analyze->add_option("--size", aa.size, "Synthetic image size")->check(CLI::PositiveNumber);
    analyze->add_option("--nir", aa.nir, "NIR PNG");
    analyze->add_option("--noisy", aa.noisy, "Noisy RGB PNG");
    analyze->add_option("--clean", aa.clean, "Clean RGB PNG");
    analyze->add_option("--out", aa.out, "Curves CSV")->required();

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate-noise", "Apply the configured noise model");
    simulate->add_option("--in", sa.in, "Clean PNG");
    simulate->add_option("--out", sa.out, "Noisy PNG");
    simulate->add_option("--scene", sa.scene, "Write a synthetic clean/nir/noisy triple to this directory");
    simulate->add_option("--size", sa.size, "Synthetic scene size (default data.size)");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train on synthetic or on-disk triples");
    train->add_option("--out", ta.out, "Checkpoint path")->required();
    train->add_option("--metrics", ta.metrics, "Metrics CSV path")->required();
    train->add_option("--data", ta.data, "Directory with clean/ and nir/ PNGs");

    DenoiseArgs da;
    auto* denoise = app.add_subcommand("denoise", "Run a checkpoint on a noisy/NIR pair");
    denoise->add_option("--checkpoint", da.checkpoint, "Checkpoint path")->required();
    denoise->add_option("--noisy", da.noisy, "Noisy RGB PNG")->required();
    denoise->add_option("--nir", da.nir, "NIR PNG")->required();
    denoise->add_option("--out", da.out, "Output PNG")->required();
    denoise->add_option("--reference", da.reference, "Clean PNG for PSNR/SSIM");

    GradcheckArgs ga;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    gradcheck->add_option("--module", ga.module, "fdsm, fefm, sam, network or all");
    gradcheck->add_flag("--inject-fault", ga.inject_fault, "Double the convolution weight gradient");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (analyze->parsed()) return run_analyze(g, aa);
        if (simulate->parsed()) return run_simulate(g, sa);
        if (train->parsed()) return run_train(g, ta);
        if (denoise->parsed()) return run_denoise(g, da);
        if (gradcheck->parsed()) return run_gradcheck(g, ga);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    } catch (const std::exception& e) {
        // Config, IO, shape and argument problems.
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
    return kUsage;
}
