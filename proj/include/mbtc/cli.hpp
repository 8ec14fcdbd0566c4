#pragma once

// mbtc command line: gen-rules, gen-trace, build, derive-eb, truncate,
// classify and bench. Stages exchange JSON documents through files.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bench.hpp"
#include "serialize.hpp"

namespace mbtc {

namespace detail {

inline void write_json(const std::string& path, const json& j) { write_text_file(path, j.dump(1) + "\n"); }

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multibit decision-tree packet classifier"};
  app.require_subcommand(1);

  // gen-rules
  std::uint64_t seed = 1;
  std::size_t count = 1000;
  std::string profile = "acl", out_path;
  auto* gen_rules = app.add_subcommand("gen-rules", "Generate a synthetic ClassBench-format ruleset");
  gen_rules->add_option("--seed", seed)->required();
  gen_rules->add_option("--count", count)->required();
  gen_rules->add_option("--profile", profile)->check(CLI::IsMember({"acl", "ipc", "acl-like", "ipc-like"}));
  gen_rules->add_option("--out", out_path)->required();

  // gen-trace
  std::string rules_path;
  auto* gen_trace = app.add_subcommand("gen-trace", "Sample headers inside the rules of a ruleset");
  gen_trace->add_option("--rules", rules_path)->required()->check(CLI::ExistingFile);
  gen_trace->add_option("--seed", seed)->required();
  gen_trace->add_option("--count", count)->required();
  gen_trace->add_option("--out", out_path)->required();

  // build
  int binth = 16, max_depth = 24;
  std::string builder = "greedy", objective = "time", config_path, log_path;
  double weight = 0.5;
  int iterations = -1, rollouts = -1;
  auto* build = app.add_subcommand("build", "Build a decision tree");
  build->add_option("--rules", rules_path)->required()->check(CLI::ExistingFile);
  build->add_option("--binth", binth)->check(CLI::PositiveNumber);
  build->add_option("--max-depth", max_depth)->check(CLI::PositiveNumber);
  build->add_option("--builder", builder)->check(CLI::IsMember({"greedy", "rl"}));
  build->add_option("--objective", objective)->check(CLI::IsMember({"time", "space", "combined"}));
  build->add_option("--weight", weight)->check(CLI::Range(0.0, 1.0));
  build->add_option("--iterations", iterations)->check(CLI::PositiveNumber);
  build->add_option("--rollouts", rollouts)->check(CLI::PositiveNumber);
  build->add_option("--config", config_path, "JSON training config")->check(CLI::ExistingFile);
  build->add_option("--seed", seed);
  build->add_option("--log", log_path, "Training log CSV (rl builder)");
  build->add_option("--out", out_path)->required();

  // derive-eb
  std::string tree_path;
  auto* derive = app.add_subcommand("derive-eb", "Annotate a tree with effective bits");
  derive->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
  derive->add_option("--out", out_path)->required();

  // truncate
  int group_binth = 40;
  auto* trunc = app.add_subcommand("truncate", "Truncate an annotated tree and build lookup tables");
  trunc->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
  trunc->add_option("--group-binth", group_binth)->required()->check(CLI::PositiveNumber);
  trunc->add_option("--out", out_path)->required();

  // classify
  std::string engine_path, trace_path;
  std::vector<std::string> headers;
  auto* classify = app.add_subcommand("classify", "Classify headers and check them against the oracle");
  auto* engine_opt = classify->add_option("--engine", engine_path, "Engine document")->check(CLI::ExistingFile);
  auto* tree_opt = classify->add_option("--tree", tree_path, "Tree document (unibit)")->check(CLI::ExistingFile);
  engine_opt->excludes(tree_opt);
  classify->add_option("--header", headers, "src_ip,dst_ip,src_port,dst_port,proto");
  classify->add_option("--trace", trace_path)->check(CLI::ExistingFile);

  // bench
  std::vector<int> binths{16}, group_binths{40};
  std::string csv_path, name;
  std::size_t trace_count = 10000;
  std::uint64_t trace_seed = 1;
  auto* bench = app.add_subcommand("bench", "Paired unibit vs multibit benchmark");
  bench->add_option("--rules", rules_path)->required()->check(CLI::ExistingFile);
  bench->add_option("--binth", binths)->delimiter(',')->check(CLI::PositiveNumber);
  bench->add_option("--group-binth", group_binths)->delimiter(',')->check(CLI::PositiveNumber);
  bench->add_option("--trace", trace_path)->check(CLI::ExistingFile);
  bench->add_option("--trace-count", trace_count, "Headers to generate when --trace is absent");
  bench->add_option("--trace-seed", trace_seed);
  bench->add_option("--builder", builder)->check(CLI::IsMember({"greedy", "rl"}));
  bench->add_option("--max-depth", max_depth)->check(CLI::PositiveNumber);
  bench->add_option("--iterations", iterations)->check(CLI::PositiveNumber);
  bench->add_option("--rollouts", rollouts)->check(CLI::PositiveNumber);
  bench->add_option("--config", config_path)->check(CLI::ExistingFile);
  bench->add_option("--seed", seed);
  bench->add_option("--name", name, "Ruleset label in reports (default: file stem)");
  bench->add_option("--csv", csv_path)->required();

  std::vector<std::string> argv_store{"mbtc"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  auto train_config = [&](CLI::App* sub) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : train_config_from_json(load_json(config_path));
    if (sub->count("--seed") || config_path.empty()) cfg.seed = seed;
    if (iterations > 0) cfg.iterations = iterations;
    if (rollouts > 0) cfg.rollouts_per_iteration = rollouts;
    cfg.binth = binth;
    cfg.max_depth = max_depth;
    if (sub->count("--objective") || config_path.empty()) cfg.objective = Objective::parse(objective, weight);
    cfg.validate();
    return cfg;
  };

  try {
    if (*gen_rules) {
      write_text_file(out_path, serialize_classbench(generate_ruleset(seed, count, parse_profile(profile))));
      out << "wrote " << count << " rules to " << out_path << "\n";
    } else if (*gen_trace) {
      const Ruleset rs = load_classbench(rules_path);
      write_text_file(out_path, serialize_trace(generate_trace(rs, seed, count)));
      out << "wrote " << count << " headers to " << out_path << "\n";
    } else if (*build) {
      auto rs = std::make_shared<const Ruleset>(load_classbench(rules_path));
      Tree tree = [&] {
        if (builder == "greedy") return build_greedy(rs, binth, max_depth);
        TrainResult res = train(rs, train_config(build));
        if (!log_path.empty()) write_text_file(log_path, train_log_csv(res.log));
        return std::move(res.tree);
      }();
      detail::write_json(out_path, tree_to_json(tree));
      const Metrics m = tree_stats(tree);
      out << "nodes=" << m.node_count << " leaves=" << m.leaf_count << " oversized=" << m.oversized_leaves
          << " worst=" << m.worst_accesses << " avg=" << m.avg_accesses << " bytes_per_rule=" << m.bytes_per_rule
          << "\n";
    } else if (*derive) {
      Tree tree = tree_from_json(load_json(tree_path));
      const EbAnnotation ann = derive_effective_bits(tree);
      detail::write_json(out_path, tree_to_json(tree));
      out << "annotated " << ann.positions.size() << " bit-addressed nodes, " << ann.non_addressable.size()
          << " partition children\n";
    } else if (*trunc) {
      const Tree tree = tree_from_json(load_json(tree_path));
      const Engine engine = build_lookup_tables(truncate(tree, group_binth));
      detail::write_json(out_path, engine_to_json(engine));
      const Metrics m = engine_stats(engine);
      out << "spliced=" << engine.tree.spliced.size() << " tables=" << engine.tables.size()
          << " worst=" << m.worst_accesses << " avg=" << m.avg_accesses << " bytes_per_rule=" << m.bytes_per_rule
          << "\n";
    } else if (*classify) {
      if (engine_path.empty() && tree_path.empty()) throw Error("classify needs --engine or --tree");
      std::vector<PacketHeader> hs;
      for (const auto& h : headers) hs.push_back(parse_header(h));
      if (!trace_path.empty()) {
        const auto tr = parse_trace(read_text_file(trace_path));
        hs.insert(hs.end(), tr.begin(), tr.end());
      }
      if (hs.empty()) throw Error("classify needs --header or --trace");
      std::optional<Engine> engine;
      std::optional<Tree> tree;
      if (!engine_path.empty()) engine = engine_from_json(load_json(engine_path));
      else tree = tree_from_json(load_json(tree_path));
      const Ruleset& rs = engine ? engine->ruleset() : tree->ruleset();
      for (const auto& h : hs) {
        const ClassifyResult r = engine ? classify_multibit(*engine, h) : classify_unibit(*tree, h);
        const auto want = oracle_classify(rs, h);
        if (r.rule != want) throw OracleMismatch(h, engine ? "multibit" : "unibit", r.rule, want);
        out << format_header(h, ',') << " rule=" << (r.rule ? std::to_string(*r.rule) : "none")
            << " accesses=" << r.accesses << "\n";
      }
    } else if (*bench) {
      auto rs = std::make_shared<const Ruleset>(load_classbench(rules_path));
      const auto trace = trace_path.empty() ? generate_trace(*rs, trace_seed, trace_count)
                                            : parse_trace(read_text_file(trace_path));
      BenchConfig cfg;
      cfg.ruleset_name = name.empty() ? std::filesystem::path(rules_path).stem().string() : name;
      cfg.builder = parse_builder(builder);
      cfg.binths = binths;
      cfg.group_binths = group_binths;
      cfg.max_depth = max_depth;
      if (cfg.builder == Builder::rl) cfg.train = train_config(bench);
      const auto results = run_bench(rs, cfg, trace);
      emit_report(results, csv_path);
      out << bench_summary(results);
    }
  } catch (const OracleMismatch& e) {
    err << "oracle mismatch: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mbtc
