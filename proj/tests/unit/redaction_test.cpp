#include <doctest.h>

#include <regex>

#include "elm/eval/redaction.hpp"

using namespace elm::eval;

TEST_SUITE("redaction") {
    TEST_CASE("nineteen registry families") {
        CHECK(registry_patterns().size() == 19);
        for (const auto& p : registry_patterns()) CHECK_NOTHROW(std::regex(p.regex));
    }

    TEST_CASE("identifiers inside sentences are replaced") {
        const auto r = redact_registry_ids("Registered at ClinicalTrials.gov (NCT01234567) and ISRCTN12345.");
        CHECK(r.count == 2);
        CHECK(r.text == "Registered at ClinicalTrials.gov ([redacted]) and [redacted].");
    }

    TEST_CASE("longest match wins at a position") {
        // CTRI/... could also be read as a shorter CTRI prefix
        const auto r = redact_registry_ids("CTRI/2019/05/019200 enrolled");
        CHECK(r.count == 1);
        CHECK(r.text == "[redacted] enrolled");
    }

    TEST_CASE("near misses are left alone") {
        for (const char* s : {"NCT0123456 is too short", "nct01234567 lowercase", "KCT123 short", "RBR- empty",
                              "Sri Lanka SLCTR/abc"}) {
            CAPTURE(s);
            CHECK(redact_registry_ids(s).count == 0);
        }
    }

    TEST_CASE("fixed-width families stop at their width") {
        const auto r = redact_registry_ids("NCT012345678");
        CHECK(r.count == 1);
        CHECK(r.text == "[redacted]8");
    }

    TEST_CASE("redaction is idempotent") {
        const std::string s = "IDs: ACTRN12618000123456, DRKS00012345, JPRN-UMIN000012345.";
        const auto once = redact_registry_ids(s);
        const auto twice = redact_registry_ids(once.text);
        CHECK(once.count == 3);
        CHECK(twice.count == 0);
        CHECK(twice.text == once.text);
    }
}
