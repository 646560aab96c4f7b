#ifndef PREFCAL_PARSE_HPP
#define PREFCAL_PARSE_HPP

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace prefcal {

/// Tag grammar for the judge's structured output. Matching is case-sensitive
/// and whitespace inside a tag is trimmed before interpretation.
struct OutputGrammar {
  enum class Occurrence { First, Last };

  std::string prob_tag = "prob_rb_better";
  std::string think_tag = "think";
  std::string answer_tag = "answer";
  // Chain-of-thought may mention a tag before emitting the real one, so the
  // last well-formed occurrence wins by default.
  Occurrence occurrence = Occurrence::Last;

  /// Tag names must be nonempty and pairwise distinct.
  void validate() const;
};

/// Outcome of the report parser: a probability or the unparsable mark.
struct ParsedReport {
  std::optional<double> value;

  bool parsable() const { return value.has_value(); }
  double probability() const { return *value; }

  static ParsedReport unparsable() { return {}; }
  static ParsedReport of(double p) { return {p}; }
};

enum class VerdictLetter { A, B, Unparsable };

/// Deterministic rule-based extraction of the verbalized probability.
/// Selects the first/last well-formed <prob_tag>...</prob_tag> span, trims
/// it, and accepts plain decimal syntax ("0.85", "1", ".5") with a value in
/// [0, 1]. Everything else, including percentages and malformed tags, is
/// unparsable. Never throws: unparsable is a value, not an error.
ParsedReport parse_report(std::string_view text, const OutputGrammar& grammar);

/// Extracts the single letter A or B from the answer tag, or from a bare
/// single-character output.
VerdictLetter parse_verdict_letter(std::string_view text,
                                   const OutputGrammar& grammar);

/// Inverse of parse_report for target composition: optional think block
/// followed by the probability tag with `precision` digits after the point.
/// precision must be in [0, 6]; p in [0, 1].
std::string format_report(double p, int precision,
                          const std::optional<std::string>& rationale,
                          const OutputGrammar& grammar);

/// Fraction of texts whose parse_report yields a probability.
/// Throws std::domain_error on an empty input list.
double parsability_rate(std::span<const std::string> texts,
                        const OutputGrammar& grammar);

}  // namespace prefcal

#endif  // PREFCAL_PARSE_HPP
