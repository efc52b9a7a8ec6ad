#include "core/error.hpp"
#include "core/pipeline.hpp"

namespace omgm {

namespace {

constexpr std::string_view kMllmInstruction =
    "Answer the encyclopedic question about the given image. Don't mention the visuall content "
    "of image in your output. Directly output the answer of the question according to the "
    "context.\n";

constexpr std::string_view kFallbackToModelKnowledge =
    "If the context does not contain the information required to answer the question, you "
    "should answer the question using internal model knowledge.\n";

constexpr std::string_view kInfoseekFormatRule =
    "If you need to answer questions about numbers or time, please output the corresponding "
    "numerical format directly. ";

constexpr std::string_view kInfoseekExample =
    "There is an example:\n"
    "- Context: # Wiki Article: Dolomites\n"
    "## Section Title: Dolomites\n"
    "The Dolomites, also known as the Dolomite Mountains, Dolomite Alps or Dolomitic Alps, are a "
    "mountain range located in northeastern Italy. The Dolomites are located in the regions of "
    "Veneto, Trentino-Alto Adige/Südtirol and Friuli Venezia Giulia, covering an area shared "
    "between the provinces of Belluno, Vicenza, Verona, Trentino, South Tyrol, Udine and "
    "Pordenone.\n"
    "- Question: Which city or region does this mountain locate in?\n"
    "Just answer the questions , no explanations needed. Short answer is: Province of Belluno\n";

constexpr std::string_view kShortAnswerCue =
    "Just answer the questions , no explanations needed. Short answer is:";

constexpr std::string_view kSummarySystem =
    "You are a Wiki Summary Generator Assistant. Following is some information about you:\n"
    "\n"
    "## Profile\n"
    "- name: Wiki Summary Generator Assistant\n"
    "- language: English\n"
    "- description: The Wiki Summary Generator Assistant is designed to create concise and "
    "informative summaries based on provided Wikipedia content. It extracts key aspects of the "
    "entity mentioned in the Wiki article, covering various dimensions such as history, "
    "characteristics, significance, appearance and impact.\n"
    "\n"
    "## Workflows\n"
    "1. Input the provided Wikipedia content into the system.\n"
    "2. Identify the main sections and key information related to the entity.\n"
    "3. Synthesize this information into a well-structured summary.\n"
    "4. Review and refine the summary for clarity, coherence, and completeness before "
    "finalizing.\n"
    "\n"
    "## Rules\n"
    "1. Focus on summarizing key details across multiple aspects (e.g., appearance, features, "
    "impact) of the entity.\n"
    "2. Ensure the summary is concise, clear, and free of irrelevant details.\n"
    "3. Retain the original meaning and context of the Wiki content while rephrasing it into a "
    "summary.\n";

std::string summary_prompt_for(const std::string& content) {
  std::string p = "System:\n";
  p += kSummarySystem;
  p += "\nUser:\nFollowing is the input Wikipedia content:\n\n";
  p += content;
  p +=
      "\n\nBased on the above Wikipedia content, I would like you to generate a summary of the "
      "Wikipedia content.\nHere is the summary of the Wikipedia content:";
  return p;
}

}  // namespace

std::string render_context(const std::string& title, const SectionRecord& section) {
  std::string out = "# Wiki Article: " + title + "\n## Section Title: ";
  out += section.heading.empty() ? title : section.heading;
  out += "\n";
  out += section.body;
  return out;
}

std::string render_article(const EntityRecord& entity) {
  std::string out = "# Wiki Article: " + entity.title;
  for (const auto& s : entity.sections) {
    out += "\n## Section Title: ";
    out += s.heading.empty() ? entity.title : s.heading;
    out += "\n";
    out += s.body;
  }
  return out;
}

std::string assemble_prompt(const FinalContext& context, const std::string& question,
                            PromptStyle style, GeneratorKind kind) {
  const bool mllm = kind == GeneratorKind::kMllm;
  const std::string ctx = render_context(context.entity_title, context.section);
  std::string p = "System:\n";
  switch (style) {
    case PromptStyle::kEvqa:
      p += mllm ? kMllmInstruction
                : std::string_view("You are a helpful assistant for answering encyclopedic "
                                   "questions.\n");
      p += kFallbackToModelKnowledge;
      p += "\nUser:\n";
      if (mllm) p += "<image>\n";
      p += "- Context: " + ctx + "\n- Question: " + question + "\nThe answer is:";
      return p;
    case PromptStyle::kInfoseek:
      p += mllm ? kMllmInstruction
                : std::string_view("You are a helpful assistant for answering encyclopedic "
                                   "questions. Do not answer anything else.\n");
      p += kInfoseekFormatRule;
      p += kFallbackToModelKnowledge;
      p += kInfoseekExample;
      p += "\nUser:\n";
      if (mllm) p += "<image>\n";
      p += "- Context: " + ctx + "\n- Question: " + question + "\n";
      p += kShortAnswerCue;
      return p;
    case PromptStyle::kSummary:
      return summary_prompt_for(ctx);
  }
  throw Error(ErrorCode::kInvalidArgument, "assemble_prompt: unknown prompt style");
}

std::string summary_prompt(const EntityRecord& entity) {
  return summary_prompt_for(render_article(entity));
}

}  // namespace omgm
