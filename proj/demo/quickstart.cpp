// A tiny lake: find the columns that join with a query column, exactly and
// approximately.

#include "lakejoin/lakejoin.hpp"

#include <cstdio>

using namespace lakejoin;

namespace {

void print(const char* label, const SearchResult& r) {
    std::printf("%s\n", label);
    for (const auto& h : r.hits) std::printf("  %-22s %.3f\n", h.id.c_str(), h.score);
}

}  // namespace

int main() {
    Repository lake({
        Column("companies#0", {"Apple", "GE", "Microsoft", "Yahoo!", "Amazon", "Intel", "Oracle"},
               "Company information", "Company"),
        Column("tickers#1", {"Apple", "Microsoft", "Amazon", "Alphabet", "Meta", "Nvidia"}, "Stock tickers",
               "Name"),
        Column("fruit#0", {"Apple", "Banana", "Cherry", "Grape", "Mango"}, "Fruit", "fruit"),
        Column("cities#0", {"Paris", "Berlin", "Madrid", "Rome", "Tokyo"}, "Capital cities", "city"),
    });
    Column query("q", {"Microsoft", "Amazon", "Apple", "Intel", "IBM"}, "Tech firms", "firm");

    auto text = render(query, Pattern::TitleColnameStatCol, SampleStrategy::frequency(512), lake);
    std::printf("query text: %s\n\n", text.text.c_str());

    print("exact equi-join top-3", EquiIndex(lake).topk(query, 3));

    HashCellEmbedder cells(32, 0);
    print("exact semantic-join top-3 (tau = 0.5)", exact_semantic_topk({query, 3}, lake, {0.5, &cells}));

    print("minhash top-3", SketchIndex(lake, 256).topk(query, 3));

    HashColumnEmbedder embedder(64, 0);
    HnswIndex index(embedder.dim(), HnswParams{});
    for (const auto& c : lake.columns()) {
        index.add(c.id(), embedder.embed(render(c, kDefaultPattern, SampleStrategy::frequency(512), lake).text));
    }
    std::printf("hnsw top-3 (hash embedder)\n");
    for (const auto& n : index.knn(embedder.embed(text.text), 3)) std::printf("  %-22s d=%.3f\n", n.id.c_str(), n.distance);
    return 0;
}
