#include "litpipe/corpus.hpp"

#include "litpipe/error.hpp"
#include "litpipe/text.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <tuple>

namespace litpipe {

std::string_view to_string(SortKey key) {
    switch (key) {
    case SortKey::Relevance: return "relevance";
    case SortKey::CitationCount: return "citations";
    case SortKey::Year: return "year";
    }
    return "relevance";
}

SortKey sort_key_from_string(std::string_view name) {
    if (text::iequals(name, "relevance")) return SortKey::Relevance;
    if (text::iequals(name, "citations") || text::iequals(name, "citation_count") ||
        text::iequals(name, "citationcount")) {
        return SortKey::CitationCount;
    }
    if (text::iequals(name, "year")) return SortKey::Year;
    fail(ErrorCode::InvalidArgument, "unknown sort key '" + std::string(name) + "'");
}

std::string normalize_title(std::string_view title) {
    std::string out;
    out.reserve(title.size());
    bool pending_space = false;
    for (unsigned char c : title) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
        } else if (std::ispunct(c)) {
            continue;
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

PaperRecord to_paper(const SourceRecord& record) {
    PaperRecord p;
    p.canonical_id = std::string(to_string(record.source)) + ":" + record.source_id;
    p.external_ids = record.external_ids;
    p.title = record.title;
    p.abstract = record.abstract;
    p.year = record.year;
    p.citation_count = record.citation_count;
    p.url = record.url;
    p.authors = record.authors;
    p.sources = {record.source};
    p.best_source_position = record.source_position;
    return p;
}

bool same_work(const PaperRecord& a, const PaperRecord& b) {
    if (a.canonical_id == b.canonical_id) return true;
    auto id = [](const PaperRecord& p, const char* key) -> const std::string* {
        auto it = p.external_ids.find(key);
        return it == p.external_ids.end() || it->second.empty() ? nullptr : &it->second;
    };
    const std::string* doi_a = id(a, "doi");
    const std::string* doi_b = id(b, "doi");
    const std::string* arxiv_a = id(a, "arxiv");
    const std::string* arxiv_b = id(b, "arxiv");
    if (doi_a && doi_b && *doi_a == *doi_b) return true;
    if (arxiv_a && arxiv_b && *arxiv_a == *arxiv_b) return true;
    // comparable identifiers that disagree veto the title fallback
    if ((doi_a && doi_b) || (arxiv_a && arxiv_b)) return false;
    // Spacing is ignored so "Wikipedia-based" and "wikipedia based" agree.
    auto compact = [](const std::string& title) {
        auto t = normalize_title(title);
        t.erase(std::remove(t.begin(), t.end(), ' '), t.end());
        return t;
    };
    auto title_a = compact(a.title);
    return !title_a.empty() && title_a == compact(b.title);
}

namespace {

struct Member {
    PaperRecord paper;
    std::size_t order = 0;  // position in the flattened input
};

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

template <typename T>
void fill(std::optional<T>& target, const std::optional<T>& candidate) {
    if (!target && candidate) target = candidate;
}

PaperRecord merge_group(std::vector<const Member*> group) {
    // precedence: S2-backed records first, then best position, then input order
    std::stable_sort(group.begin(), group.end(), [](const Member* a, const Member* b) {
        auto key = [](const Member* m) {
            return std::make_tuple(m->paper.sources.count(Source::S2) == 0, m->paper.best_source_position, m->order);
        };
        return key(a) < key(b);
    });

    PaperRecord merged = group.front()->paper;
    for (std::size_t i = 1; i < group.size(); ++i) {
        const PaperRecord& other = group[i]->paper;
        fill(merged.abstract, other.abstract);
        fill(merged.year, other.year);
        fill(merged.citation_count, other.citation_count);
        fill(merged.url, other.url);
        if (merged.authors.empty()) merged.authors = other.authors;
        for (const auto& [key, value] : other.external_ids) merged.external_ids.emplace(key, value);
        merged.sources.insert(other.sources.begin(), other.sources.end());
        merged.best_source_position = std::min(merged.best_source_position, other.best_source_position);
    }
    return merged;
}

std::vector<PaperRecord> dedup(const std::vector<Member>& members) {
    DisjointSets sets(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            if (same_work(members[i].paper, members[j].paper)) sets.unite(i, j);
        }
    }

    std::map<std::size_t, std::vector<const Member*>> groups;
    for (std::size_t i = 0; i < members.size(); ++i) groups[sets.find(i)].push_back(&members[i]);

    struct Ranked {
        PaperRecord paper;
        std::size_t tie_break;
    };
    std::vector<Ranked> out;
    out.reserve(groups.size());
    for (auto& [root, group] : groups) {
        PaperRecord merged = merge_group(group);
        // earliest input slot holding the best position
        std::size_t tie = members.size();
        for (const Member* m : group) {
            if (m->paper.best_source_position == merged.best_source_position) tie = std::min(tie, m->order);
        }
        out.push_back({std::move(merged), tie});
    }
    std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
        return std::tie(a.paper.best_source_position, a.tie_break) <
               std::tie(b.paper.best_source_position, b.tie_break);
    });

    std::vector<PaperRecord> result;
    result.reserve(out.size());
    for (auto& r : out) result.push_back(std::move(r.paper));
    return result;
}

}  // namespace

std::vector<PaperRecord> merge_and_dedup(const std::vector<std::vector<SourceRecord>>& batches) {
    std::vector<Member> members;
    for (const auto& batch : batches) {
        for (const auto& record : batch) members.push_back({to_paper(record), members.size()});
    }
    return dedup(members);
}

std::vector<PaperRecord> merge_and_dedup(const std::vector<PaperRecord>& papers) {
    std::vector<Member> members;
    members.reserve(papers.size());
    for (const auto& p : papers) members.push_back({p, members.size()});
    return dedup(members);
}

std::vector<PaperRecord> sort_papers(const std::vector<PaperRecord>& papers, SortKey key) {
    std::vector<PaperRecord> out = papers;
    switch (key) {
    case SortKey::Relevance:
        std::stable_sort(out.begin(), out.end(), [](const PaperRecord& a, const PaperRecord& b) {
            return a.best_source_position < b.best_source_position;
        });
        break;
    case SortKey::CitationCount:
        std::stable_sort(out.begin(), out.end(), [](const PaperRecord& a, const PaperRecord& b) {
            if (!a.citation_count || !b.citation_count) return a.citation_count.has_value() && !b.citation_count;
            return *a.citation_count > *b.citation_count;
        });
        break;
    case SortKey::Year:
        std::stable_sort(out.begin(), out.end(), [](const PaperRecord& a, const PaperRecord& b) {
            if (!a.year || !b.year) return a.year.has_value() && !b.year;
            return *a.year > *b.year;
        });
        break;
    }
    return out;
}

std::vector<PaperRecord> truncate_candidates(const std::vector<PaperRecord>& papers, std::size_t k) {
    if (k < 1) fail(ErrorCode::InvalidArgument, "top-k must be at least 1");
    auto n = std::min(k, papers.size());
    return {papers.begin(), papers.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace litpipe
