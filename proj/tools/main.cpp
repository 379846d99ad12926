#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>

#include "mflab/harness.hpp"
#include "mflab/parallel.hpp"

namespace {

// exit codes: 0 ok, 2 schema error, 3 numerical failure, 4 invariant violation
int classify(const std::exception& e) {
    if (dynamic_cast<const mflab::schema_error*>(&e)) return 2;
    if (dynamic_cast<const mflab::dimension_error*>(&e)) return 2;
    if (dynamic_cast<const mflab::size_error*>(&e)) return 2;
    if (dynamic_cast<const mflab::integration_error*>(&e)) return 3;
    if (dynamic_cast<const mflab::convergence_error*>(&e)) return 3;
    if (dynamic_cast<const mflab::inconsistency_error*>(&e)) return 4;
    if (dynamic_cast<const mflab::invariant_error*>(&e)) return 4;
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mflab - effective evolution equations laboratory"};
    app.require_subcommand(1);

    std::string spec_path, out_dir = ".", table_path, x_col, y_col, kind;
    int threads = 0;
    bool quiet = false;

    auto* run_cmd = app.add_subcommand("run", "run an experiment spec");
    run_cmd->add_option("--spec", spec_path, "experiment spec file")->required();
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--threads", threads, "worker threads (0 = library default)");
    run_cmd->add_flag("--quiet", quiet, "suppress progress output");

    auto* validate_cmd = app.add_subcommand("validate", "validate a spec against the schema");
    validate_cmd->add_option("--spec", spec_path, "experiment spec file")->required();

    auto* fit_cmd = app.add_subcommand("fit", "log-log rate fit on a result table");
    fit_cmd->add_option("--table", table_path, "CSV result table")->required();
    fit_cmd->add_option("--x", x_col, "x column")->required();
    fit_cmd->add_option("--y", y_col, "y column")->required();
    fit_cmd->add_option("--spec", spec_path, "spec to check the table's hash against");

    auto* list_cmd = app.add_subcommand("list-experiments", "list experiment kinds and keys");
    list_cmd->add_option("kind", kind, "show the key schema of one kind");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (run_cmd->parsed()) {
            if (threads > 0) mflab::par::set_threads(threads);
            const auto spec = mflab::harness::parse_spec_file(spec_path);
            const auto out = mflab::harness::run(spec, out_dir, quiet);
            if (!quiet)
                for (const auto& f : out.files) std::cout << f << "\n";
        } else if (validate_cmd->parsed()) {
            mflab::harness::validate_spec(mflab::harness::parse_spec_file(spec_path));
            std::cout << "ok\n";
        } else if (fit_cmd->parsed()) {
            const auto csv = mflab::harness::read_csv(table_path);
            if (!spec_path.empty()) {
                const auto spec = mflab::harness::parse_spec_file(spec_path);
                if (mflab::harness::spec_hash_hex(spec) != csv.hash_hex)
                    throw mflab::invariant_error("spec hash mismatch: table was produced by a "
                                                 "different spec");
            }
            const auto fit = mflab::harness::fit_rate(csv.table, x_col, y_col);
            std::cout << "slope=" << mflab::harness::format_double(fit.slope)
                      << " intercept=" << mflab::harness::format_double(fit.intercept)
                      << " residual=" << mflab::harness::format_double(fit.residual) << "\n";
        } else if (list_cmd->parsed()) {
            if (!kind.empty()) {
                std::cout << mflab::harness::describe_experiment(kind);
            } else {
                for (const auto& k : mflab::harness::list_experiments()) std::cout << k << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    }
    return 0;
}
