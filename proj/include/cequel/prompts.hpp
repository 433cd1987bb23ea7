#pragma once

#include <string>

#include "cequel/corpus.hpp"
#include "cequel/errors.hpp"

namespace cequel {

/// Dataset-specific wording of the pair/triplet questions. The rendered
/// layout is fixed; only the task subject, the per-item noun, the category
/// word, and two small grammar choices vary by dataset.
struct PromptTemplate {
    std::string name;      // key used in configs
    std::string subject;   // "Cluster <subject> docs by ..."
    std::string noun;      // item label: News / Tweet / Intent / Topic / Domain / Scenario
    std::string category;  // lowercase category word in "the same <category> category"
    std::string verb;      // "belong to" or "are"
    bool oxford_comma = true;  // comma before "and" when listing three items
};

inline PromptTemplate builtin_template(const std::string& name) {
    if (name == "bbcnews") return {"bbcnews", "BBC News", "News", "news", "belong to", true};
    if (name == "tweet") return {"tweet", "Tweet", "Tweet", "tweet", "belong to", true};
    if (name == "bank77") return {"bank77", "Bank77", "Intent", "intent", "belong to", true};
    if (name == "reddit") return {"reddit", "Reddit", "Topic", "topic", "belong to", true};
    if (name == "massive") return {"massive", "Massive", "Scenario", "scenario", "belong to", true};
    if (name == "clinc") return {"clinc", "CLINC", "Domain", "domain", "are", false};
    if (name == "generic") return {"generic", "the given", "Text", "text", "belong to", true};
    throw ValidationError("unknown prompt template: " + name);
}

inline std::string build_edge_prompt(const TextInstance& ta, const TextInstance& tb,
                                     const PromptTemplate& t) {
    std::string p;
    p += "Cluster " + t.subject + " docs by whether they " + t.verb + " the same " +
         t.category + " category. For each pair, respond with Yes or No without explanation.\n";
    p += "- " + t.noun + " #1: " + ta.text + "\n";
    p += "- " + t.noun + " #2: " + tb.text + "\n";
    p += "Given this context, do " + t.noun + " #1 and " + t.noun +
         " #2 likely correspond to the same " + t.category + " category?";
    return p;
}

inline std::string build_triangle_prompt(const TextInstance& ta, const TextInstance& tb,
                                         const TextInstance& tc, const PromptTemplate& t) {
    const std::string comma = t.oxford_comma ? "," : "";
    std::string p;
    p += "Cluster " + t.subject + " docs by whether they " + t.verb + " the same " +
         t.category +
         " category. For each triangle, respond with a, b, c, d, or e without explanation.\n";
    p += "- " + t.noun + " #1: " + ta.text + "\n";
    p += "- " + t.noun + " #2: " + tb.text + "\n";
    p += "- " + t.noun + " #3: " + tc.text + "\n";
    p += "Given this context, do " + t.noun + " #1, " + t.noun + " #2" + comma + " and " +
         t.noun + " #3 likely correspond to the same " + t.category + " category?\n";
    p += "(a) All are same category. (b) Only #1 and #2 are same category. "
         "(c) Only #1 and #3 are same category. (d) Only #2 and #3 are same category. "
         "(e) None.";
    return p;
}

}  // namespace cequel
