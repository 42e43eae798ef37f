// Batch entry points for the calibration pipeline:
//   make-table     write the bundled synthetic mortality table
//   gen-portfolio  sample and price a synthetic portfolio
//   fit-baseline   stage 1, table transfer fit
//   fit-residual   stage 2, residual boosting under the economic loss
//   backtest       premium backtest of a checkpoint (or the stored truth)
//   report         diagnostic CSVs: curves, homogeneity, decomposition
//
// Exit codes: 0 ok, 2 input error, 3 numerical failure, 4 consistency failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lifecal/mortality.hpp"
#include "lifecal/portfolio.hpp"
#include "lifecal/training.hpp"
#include "lifecal/validate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitConsistency = 4;

// Config file support: JSON keys mirror long flag names (without the
// leading dashes); command-line flags win over config values.
void apply_config(CLI::App& cmd, const std::string& config_path) {
    if (config_path.empty()) return;
    const json cfg = json::parse(lifecal::read_file(config_path));
    for (const auto& [key, value] : cfg.items()) {
        CLI::Option* opt = cmd.get_option_no_throw("--" + key);
        if (!opt) throw lifecal::SchemaError(config_path + ": unknown config key '" + key + "'");
        if (opt->count() > 0) continue; // explicit flag wins
        if (value.is_boolean()) {
            if (value.get<bool>()) opt->add_result("true");
            else opt->add_result("false");
        } else if (value.is_string()) {
            opt->add_result(value.get<std::string>());
        } else {
            opt->add_result(value.dump());
        }
    }
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw lifecal::SchemaError("input file not found: " + path);
}

std::vector<std::size_t> parse_widths(const std::string& spec) {
    std::vector<std::size_t> w;
    std::string cur;
    for (char ch : spec + ",") {
        if (ch == ',') {
            if (!cur.empty()) w.push_back(static_cast<std::size_t>(std::stoul(cur)));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    return w;
}

struct GenArgs {
    std::size_t n = 10000;
    std::uint64_t seed = 42;
    std::string table, out = "portfolio";
    int a0_min = 18, a0_max = 60, n_max = 48;
    double s_min = 1000.0, s_max = 1e6;
    double loading = 1.34, smoker_mult = 1.5;
    bool unisex = true;
    double alpha = 0.025, beta = 0.03, gamma1 = 0.001, gamma2 = 0.001;
    double v = 1.0 / 1.0125;
};

int run_gen(const GenArgs& a) {
    require_file(a.table);
    lifecal::PortfolioConfig cfg;
    cfg.N = a.n;
    cfg.seed = a.seed;
    cfg.a0_min = a.a0_min;
    cfg.a0_max = a.a0_max;
    cfg.n_max = a.n_max;
    cfg.S_min = a.s_min;
    cfg.S_max = a.s_max;
    cfg.expenses = {a.alpha, a.beta, a.gamma1, a.gamma2};
    cfg.v = lifecal::DiscountFactor(a.v);
    lifecal::GroundTruthModel gt;
    gt.table = lifecal::load_table(a.table);
    gt.loading = a.loading;
    gt.smoker_mult = a.smoker_mult;
    gt.unisex = a.unisex;

    const lifecal::Portfolio pf = lifecal::generate_portfolio(cfg, gt);
    lifecal::write_portfolio(pf, a.out);
    if (pf.clamped_lookups > 0)
        std::cerr << "warning: " << pf.clamped_lookups
                  << " table lookups beyond age 121 were clamped\n";
    std::cout << "wrote " << pf.contracts.size() << " contracts to " << a.out << "\n";
    return kExitOk;
}

struct FitBaseArgs {
    std::string table, gender = "male", out = "baseline.ckpt", log;
    long epochs_max = 5000;
    double lr = 0.001;
    std::size_t batch = 32;
    std::uint64_t seed = 1;
    std::string widths = "2,40,40,20,2";
    double fit_tol = 0.10;
};

int run_fit_baseline(const FitBaseArgs& a) {
    require_file(a.table);
    const lifecal::MortalityTable tbl = lifecal::load_table(a.table);
    const lifecal::TableDataset ds =
        lifecal::build_dav_dataset(tbl, lifecal::gender_from_string(a.gender));

    lifecal::BaselineHyper hp;
    hp.widths = parse_widths(a.widths);
    hp.epochs_max = a.epochs_max;
    hp.lr = a.lr;
    hp.batch_size = a.batch;
    hp.seed = a.seed;
    hp.fit_tol = a.fit_tol;

    const auto result = lifecal::fit_baseline(ds, hp, [](const lifecal::TrainLogRow& row) {
        if (row.epoch % 200 == 0)
            std::printf("epoch %5ld  kl %.3e\n", row.epoch, row.loss);
    });
    lifecal::save_baseline_checkpoint(a.out, result.checkpoint);
    lifecal::write_file_atomic(a.log.empty() ? a.out + ".log.csv" : a.log,
                               lifecal::train_log_csv(result.log));
    std::printf("fit after %ld epochs: max rel err %.4f, ratio err %.4f (%s)\n", result.epochs_run,
                result.fit.max_rel_err, result.fit.max_ratio_err,
                result.tolerance_reached ? "tolerance reached" : "epoch budget exhausted");
    std::cout << "checkpoint written to " << a.out << "\n";
    return kExitOk;
}

struct FitResArgs {
    std::string portfolio, baseline, out = "model.ckpt", log;
    long epochs_max = 300;
    double lr = -1.0; // default chosen by baseline gender
    std::size_t batch = 32;
    std::uint64_t seed = 7;
    std::string widths = "4,50,50,50,50,50,2";
    int patience = 50;
    double clip_eta = 100.0;
};

int run_fit_residual(const FitResArgs& a) {
    require_file(a.baseline);
    const lifecal::Portfolio pf = lifecal::load_portfolio(a.portfolio);
    const lifecal::BaselineCheckpoint base = lifecal::load_baseline_checkpoint(a.baseline);

    lifecal::ResidualHyper hp;
    hp.widths = parse_widths(a.widths);
    hp.epochs_max = a.epochs_max;
    hp.lr = a.lr > 0.0 ? a.lr : (base.gender == lifecal::Gender::male ? 0.005 : 0.001);
    hp.batch_size = a.batch;
    hp.seed = a.seed;
    hp.patience = a.patience;
    hp.clip_eta = a.clip_eta;

    const std::string out_path = a.out;
    const auto result = lifecal::fit_residual(
        pf, base, hp,
        [&out_path](const lifecal::TrainLogRow& row, const lifecal::Model& model, bool improved) {
            if (improved) lifecal::save_model_checkpoint(out_path, model);
            if (row.epoch % 10 == 0)
                std::printf("epoch %4ld  lr %.5f  r_emp %.4f  |g| %.2f  %.1fs\n", row.epoch, row.lr,
                            row.loss, row.grad_norm, row.wall_s);
        });
    lifecal::save_model_checkpoint(out_path, result.model);
    lifecal::write_file_atomic(a.log.empty() ? a.out + ".log.csv" : a.log,
                               lifecal::train_log_csv(result.log));
    std::printf("final r_emp %.6f after %ld epochs%s\n", result.final_risk, result.epochs_run,
                result.early_stopped ? " (early stopped)" : "");
    std::cout << "checkpoint written to " << out_path << "\n";
    return kExitOk;
}

// The checkpoint records the scaler bounds fitted at training time; a
// portfolio whose refitted bounds differ cannot belong to this checkpoint.
void check_scaler_fingerprint(const lifecal::Model& model, const lifecal::Portfolio& pf) {
    if (!(lifecal::fit_res_scaler(pf) == model.res_scaler))
        throw lifecal::ConsistencyError(
            "checkpoint/portfolio mismatch: scaler fingerprint differs from the portfolio");
}

struct BacktestArgs {
    std::string portfolio, checkpoint, out = "report";
    bool oracle = false;
};

int run_backtest(const BacktestArgs& a) {
    const lifecal::Portfolio pf = lifecal::load_portfolio(a.portfolio);

    lifecal::Model model;
    lifecal::PiProvider provider;
    if (a.oracle) {
        provider = lifecal::ground_truth_provider(pf.gt);
    } else {
        if (a.checkpoint.empty())
            throw lifecal::SchemaError("backtest: need --checkpoint or --oracle");
        require_file(a.checkpoint);
        model = lifecal::load_model_checkpoint(a.checkpoint);
        check_scaler_fingerprint(model, pf);
        provider = lifecal::model_provider(model);
    }

    const lifecal::BacktestReport rep =
        lifecal::backtest_portfolio(provider, pf, pf.config.expenses, pf.config.v);
    fs::create_directories(a.out);
    lifecal::write_file_atomic(fs::path(a.out) / "backtest.csv", lifecal::backtest_csv(rep));
    lifecal::write_file_atomic(fs::path(a.out) / "quantiles.csv", lifecal::quantiles_csv(rep));
    lifecal::write_file_atomic(fs::path(a.out) / "summary.txt", lifecal::backtest_summary(rep));
    std::cout << lifecal::backtest_summary(rep);
    return kExitOk;
}

struct ReportArgs {
    std::string portfolio, checkpoint, out = "report";
    int age_lo = 18, age_hi = 66;
    int grid_a0_lo = 18, grid_a0_hi = 60, grid_k_max = 19;
};

int run_report(const ReportArgs& a) {
    require_file(a.checkpoint);
    const lifecal::Portfolio pf = lifecal::load_portfolio(a.portfolio);
    const lifecal::Model model = lifecal::load_model_checkpoint(a.checkpoint);
    check_scaler_fingerprint(model, pf);
    const lifecal::PiProvider provider = lifecal::model_provider(model);

    const lifecal::BacktestReport rep =
        lifecal::backtest_portfolio(provider, pf, pf.config.expenses, pf.config.v);
    const lifecal::MortalityCurve curve =
        lifecal::implied_mortality(provider, pf.gt.table, a.age_lo, a.age_hi);
    const lifecal::HomogeneityGrid grid_g = lifecal::homogeneity_grid(
        provider, a.grid_a0_lo, a.grid_a0_hi, a.grid_k_max, lifecal::FeatureFlip::gender);
    const lifecal::HomogeneityGrid grid_s = lifecal::homogeneity_grid(
        provider, a.grid_a0_lo, a.grid_a0_hi, a.grid_k_max, lifecal::FeatureFlip::smoker);
    const auto decomposition = lifecal::error_decomposition(rep, pf);

    fs::create_directories(a.out);
    lifecal::write_file_atomic(fs::path(a.out) / "backtest.csv", lifecal::backtest_csv(rep));
    lifecal::write_file_atomic(fs::path(a.out) / "quantiles.csv", lifecal::quantiles_csv(rep));
    lifecal::write_file_atomic(fs::path(a.out) / "curves.csv", lifecal::curves_csv(curve));
    lifecal::write_file_atomic(fs::path(a.out) / "homogeneity.csv",
                               lifecal::homogeneity_csv(grid_g, "gender") +
                                   lifecal::homogeneity_csv(grid_s, "smoker"));
    lifecal::write_file_atomic(fs::path(a.out) / "decomposition.csv",
                               lifecal::decomposition_csv(decomposition));

    std::string summary = lifecal::backtest_summary(rep);
    summary += "\nhomogeneity score (max anti-diagonal variation):\n";
    summary += "  gender flip: " + lifecal::format_double(grid_g.max_antidiagonal_variation) + "\n";
    summary += "  smoker flip: " + lifecal::format_double(grid_s.max_antidiagonal_variation) + "\n";
    lifecal::write_file_atomic(fs::path(a.out) / "summary.txt", summary);
    std::cout << summary;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent Markov transition calibration for term-life portfolios"};
    app.require_subcommand(1);

    std::string config_path;

    auto* make_table = app.add_subcommand("make-table", "write the synthetic mortality table");
    std::string table_out = "table.csv";
    make_table->add_option("--out", table_out, "output CSV path");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-portfolio", "sample and price a synthetic portfolio");
    gen_cmd->add_option("--config", config_path, "JSON config; flags override");
    gen_cmd->add_option("--n", gen.n, "portfolio size");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--table", gen.table, "mortality table CSV")->required();
    gen_cmd->add_option("--out", gen.out, "output directory");
    gen_cmd->add_option("--a0-min", gen.a0_min, "minimum initial age");
    gen_cmd->add_option("--a0-max", gen.a0_max, "maximum initial age");
    gen_cmd->add_option("--n-max", gen.n_max, "maximum contract duration in years");
    gen_cmd->add_option("--s-min", gen.s_min, "minimum sum insured");
    gen_cmd->add_option("--s-max", gen.s_max, "maximum sum insured");
    gen_cmd->add_option("--loading", gen.loading, "multiplicative first-order buffer");
    gen_cmd->add_option("--smoker-mult", gen.smoker_mult, "smoker surcharge multiplier");
    gen_cmd->add_option("--unisex", gen.unisex, "blend genders 50/50 in the hidden model");
    gen_cmd->add_option("--alpha", gen.alpha, "acquisition loading");
    gen_cmd->add_option("--beta", gen.beta, "collection loading");
    gen_cmd->add_option("--gamma1", gen.gamma1, "administration loading (premium years)");
    gen_cmd->add_option("--gamma2", gen.gamma2, "administration loading (thereafter)");
    gen_cmd->add_option("--v", gen.v, "annual discount factor");

    FitBaseArgs fb;
    auto* fb_cmd = app.add_subcommand("fit-baseline", "stage 1: fit the table transfer baseline");
    fb_cmd->add_option("--config", config_path, "JSON config; flags override");
    fb_cmd->add_option("--table", fb.table, "mortality table CSV")->required();
    fb_cmd->add_option("--gender", fb.gender, "table column: male|female");
    fb_cmd->add_option("--out", fb.out, "checkpoint path");
    fb_cmd->add_option("--log", fb.log, "training log CSV (default: <out>.log.csv)");
    fb_cmd->add_option("--epochs-max", fb.epochs_max, "epoch budget");
    fb_cmd->add_option("--lr", fb.lr, "adam learning rate");
    fb_cmd->add_option("--batch", fb.batch, "batch size");
    fb_cmd->add_option("--seed", fb.seed, "init/shuffle seed");
    fb_cmd->add_option("--widths", fb.widths, "layer widths, comma separated");
    fb_cmd->add_option("--fit-tol", fb.fit_tol, "stage-1 relative fit tolerance");

    FitResArgs fr;
    auto* fr_cmd = app.add_subcommand("fit-residual", "stage 2: boost with the residual GRU net");
    fr_cmd->add_option("--config", config_path, "JSON config; flags override");
    fr_cmd->add_option("--portfolio", fr.portfolio, "portfolio directory")->required();
    fr_cmd->add_option("--baseline", fr.baseline, "stage-1 checkpoint")->required();
    fr_cmd->add_option("--out", fr.out, "checkpoint path");
    fr_cmd->add_option("--log", fr.log, "training log CSV (default: <out>.log.csv)");
    fr_cmd->add_option("--epochs-max", fr.epochs_max, "epoch budget");
    fr_cmd->add_option("--lr", fr.lr, "adam learning rate (default by baseline gender)");
    fr_cmd->add_option("--batch", fr.batch, "batch size");
    fr_cmd->add_option("--seed", fr.seed, "init/shuffle seed");
    fr_cmd->add_option("--widths", fr.widths, "layer widths, comma separated");
    fr_cmd->add_option("--patience", fr.patience, "early-stopping patience");
    fr_cmd->add_option("--clip-eta", fr.clip_eta, "global-norm gradient clip");

    BacktestArgs bt;
    auto* bt_cmd = app.add_subcommand("backtest", "premium backtest of a calibrated model");
    bt_cmd->add_option("--config", config_path, "JSON config; flags override");
    bt_cmd->add_option("--portfolio", bt.portfolio, "portfolio directory")->required();
    bt_cmd->add_option("--checkpoint", bt.checkpoint, "model checkpoint");
    bt_cmd->add_option("--out", bt.out, "report directory");
    bt_cmd->add_flag("--oracle", bt.oracle, "backtest the stored ground truth instead");

    ReportArgs rp;
    auto* rp_cmd = app.add_subcommand("report", "diagnostic curves, heatmap data, decomposition");
    rp_cmd->add_option("--config", config_path, "JSON config; flags override");
    rp_cmd->add_option("--portfolio", rp.portfolio, "portfolio directory")->required();
    rp_cmd->add_option("--checkpoint", rp.checkpoint, "model checkpoint")->required();
    rp_cmd->add_option("--out", rp.out, "report directory");
    rp_cmd->add_option("--age-lo", rp.age_lo, "implied-mortality age range start");
    rp_cmd->add_option("--age-hi", rp.age_hi, "implied-mortality age range end");
    rp_cmd->add_option("--grid-a0-lo", rp.grid_a0_lo, "homogeneity grid a0 start");
    rp_cmd->add_option("--grid-a0-hi", rp.grid_a0_hi, "homogeneity grid a0 end");
    rp_cmd->add_option("--grid-k-max", rp.grid_k_max, "homogeneity grid max iteration");

    try {
        app.parse(argc, argv);
        for (CLI::App* cmd : {gen_cmd, fb_cmd, fr_cmd, bt_cmd, rp_cmd})
            if (cmd->parsed() && !config_path.empty()) apply_config(*cmd, config_path);

        if (make_table->parsed()) {
            lifecal::write_file_atomic(table_out, lifecal::table_to_csv(lifecal::synthetic_table()));
            std::cout << "wrote synthetic table (non-official values) to " << table_out << "\n";
            return kExitOk;
        }
        if (gen_cmd->parsed()) return run_gen(gen);
        if (fb_cmd->parsed()) return run_fit_baseline(fb);
        if (fr_cmd->parsed()) return run_fit_residual(fr);
        if (bt_cmd->parsed()) return run_backtest(bt);
        if (rp_cmd->parsed()) return run_report(rp);
        return kExitInput;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitInput : kExitOk;
    } catch (const lifecal::ConsistencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConsistency;
    } catch (const lifecal::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const lifecal::UnpriceableError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
