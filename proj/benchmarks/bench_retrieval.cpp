#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ruleforge/ragbench.hpp"

using namespace ruleforge;

namespace {

std::vector<bench::RuleDocText> synthetic_rules(int count) {
    std::mt19937 rng(7);
    const char* verbs[] = {"file", "disclose", "retain", "report", "certify"};
    const char* objects[] = {"records", "amendments", "notices", "statements",
                             "policies"};
    std::vector<bench::RuleDocText> docs;
    docs.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        bench::RuleDocText doc;
        doc.rule_id = "R" + std::to_string(i);
        doc.rendered_text = std::string("entities must ") + verbs[rng() % 5] +
                            " " + objects[rng() % 5] + " within " +
                            std::to_string(1 + rng() % 90) + " days token" +
                            std::to_string(i);
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace

static void BuildIndex(benchmark::State& state) {
    auto docs = synthetic_rules(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto index = bench::build_index(
            docs, std::make_shared<bench::HashedTfidfEmbedding>());
        benchmark::DoNotOptimize(index.entries.size());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(BuildIndex)->Arg(64)->Arg(512)->Arg(4096);

static void RetrieveTopK(benchmark::State& state) {
    auto docs = synthetic_rules(static_cast<int>(state.range(0)));
    auto index =
        bench::build_index(docs, std::make_shared<bench::HashedTfidfEmbedding>());
    std::string query = "must disclose statements within 30 days";
    for (auto _ : state) {
        auto hits = bench::retrieve(index, query, 10);
        benchmark::DoNotOptimize(hits.size());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(RetrieveTopK)->Arg(64)->Arg(512)->Arg(4096);

static void WinTableAggregation(benchmark::State& state) {
    std::mt19937 rng(11);
    std::vector<bench::PairVerdict> verdicts;
    for (int q = 0; q < static_cast<int>(state.range(0)); ++q) {
        for (auto ordering : {bench::Ordering::AB, bench::Ordering::BA}) {
            bench::PairVerdict v;
            v.question_id = "q" + std::to_string(q);
            v.ordering = ordering;
            v.depth = 1;
            for (const auto& name : bench::pairwise_criteria()) {
                int roll = static_cast<int>(rng() % 3);
                v.winners.emplace_back(name, roll == 0 ? bench::Winner::A
                                             : roll == 1 ? bench::Winner::B
                                                         : bench::Winner::tie);
            }
            verdicts.push_back(std::move(v));
        }
    }
    for (auto _ : state) {
        auto table = bench::compute_win_table(verdicts, {1});
        benchmark::DoNotOptimize(table.aggregated.at(1));
    }
}
BENCHMARK(WinTableAggregation)->Arg(100)->Arg(1000);
