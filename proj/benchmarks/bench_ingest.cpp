#include <benchmark/benchmark.h>

#include <string>

#include "ruleforge/ingest.hpp"
#include "ruleforge/sha256.hpp"

using namespace ruleforge;

namespace {

std::string synthetic_document(int sections, int lines_per_section) {
    std::string text = "Front matter.\n\n";
    for (int s = 0; s < sections; ++s) {
        text += "## § 100." + std::to_string(s) + " Heading\n\n";
        for (int l = 0; l < lines_per_section; ++l) {
            text += "The covered entity must satisfy requirement " +
                    std::to_string(l) + " of this part.   \n";
        }
        text += "\n\n\n";
    }
    return text;
}

}  // namespace

static void NormalizeDocument(benchmark::State& state) {
    auto text = synthetic_document(static_cast<int>(state.range(0)), 40);
    for (auto _ : state) {
        auto doc = ingest::RawDocument::from_text(text);
        auto out = ingest::normalize(doc);
        benchmark::DoNotOptimize(out.text.data());
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(text.size()));
}
BENCHMARK(NormalizeDocument)->Arg(8)->Arg(64)->Arg(256);

static void SegmentDocument(benchmark::State& state) {
    auto doc = ingest::normalize(ingest::RawDocument::from_text(
        synthetic_document(static_cast<int>(state.range(0)), 40)));
    auto rules = ingest::SegmentationRules::defaults();
    for (auto _ : state) {
        auto sections = ingest::segment(doc, rules);
        benchmark::DoNotOptimize(sections.size());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(SegmentDocument)->Arg(8)->Arg(64)->Arg(256);

static void FingerprintContent(benchmark::State& state) {
    std::string content(static_cast<std::size_t>(state.range(0)), 'x');
    for (auto _ : state) {
        benchmark::DoNotOptimize(sha256_hex(content));
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(FingerprintContent)->Arg(1 << 10)->Arg(1 << 14)->Arg(1 << 18);
