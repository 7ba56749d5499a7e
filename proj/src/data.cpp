#include "splat/data.hpp"

#include <algorithm>
#include <stdexcept>

#include "splat/joint_input.hpp"
#include "splat/vocab.hpp"

namespace splat {

const ServiceSchema& Corpus::schema_of(const std::string& service_name) const {
  for (const ServiceSchema& s : schemas)
    if (s.service_name == service_name) return s;
  throw std::runtime_error("corpus: unknown service '" + service_name + "'");
}

namespace {

bool contains_subsequence(const std::vector<std::string>& haystack,
                          const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (size_t s = 0; s + needle.size() <= haystack.size(); ++s) {
    bool ok = true;
    for (size_t k = 0; k < needle.size(); ++k)
      if (haystack[s + k] != needle[k]) {
        ok = false;
        break;
      }
    if (ok) return true;
  }
  return false;
}

}  // namespace

Corpus validate_corpus(std::vector<ServiceSchema> schemas, std::vector<Dialogue> dialogues) {
  Corpus c;
  c.schemas = std::move(schemas);
  c.dialogues = std::move(dialogues);
  for (const ServiceSchema& s : c.schemas) s.validate();

  for (const Dialogue& d : c.dialogues) {
    d.validate();
    const ServiceSchema& schema = c.schema_of(d.service);
    int user_ordinal = -1;
    for (const DialogueTurn& t : d.turns) {
      if (t.speaker != Speaker::User) continue;
      ++user_ordinal;
      if (t.state.active_intent != kNoneIntentName &&
          schema.intent_index(t.state.active_intent) < 0)
        throw std::runtime_error("dialogue '" + d.dialogue_id + "': unknown intent '" +
                                 t.state.active_intent + "'");
      // history tokens up to and including this user turn
      const std::vector<std::string> history = render_utterances(d, user_ordinal);
      for (const auto& [slot_name, value] : t.state.slot_values) {
        const int si = schema.slot_index(slot_name);
        if (si < 0)
          throw std::runtime_error("dialogue '" + d.dialogue_id + "' turn " +
                                   std::to_string(user_ordinal) + ": unknown slot '" + slot_name +
                                   "'");
        if (value == "dontcare") continue;
        const SlotDef& slot = schema.slot(si);
        if (slot.is_categorical) {
          if (std::find(slot.possible_values.begin(), slot.possible_values.end(), value) ==
              slot.possible_values.end())
            throw std::runtime_error("dialogue '" + d.dialogue_id + "' turn " +
                                     std::to_string(user_ordinal) + ": categorical slot '" +
                                     slot_name + "' has value '" + value +
                                     "' outside possible_values");
        } else if (!contains_subsequence(history, tokenize(value))) {
          c.unreachable.push_back({d.dialogue_id, user_ordinal, slot_name});
        }
      }
    }
  }
  return c;
}

Corpus load_corpus(const std::string& schema_path, const std::string& dialogues_path) {
  return validate_corpus(load_schemas(schema_path), load_dialogues(dialogues_path));
}

Corpus swap_schema_variant(const Corpus& corpus, const std::vector<ServiceSchema>& variant) {
  std::vector<std::string> missing;
  std::vector<ServiceSchema> swapped = corpus.schemas;
  for (ServiceSchema& s : swapped) {
    const ServiceSchema* v = nullptr;
    for (const ServiceSchema& cand : variant)
      if (cand.service_name == s.service_name) v = &cand;
    if (!v) {
      missing.push_back("service " + s.service_name);
      continue;
    }
    for (IntentDef& intent : s.intents) {
      const int vi = v->intent_index(intent.name);
      if (vi < 0)
        missing.push_back(s.service_name + ".intent " + intent.name);
      else
        intent.description = v->intents[static_cast<size_t>(vi)].description;
    }
    for (SlotDef& slot : s.slots) {
      const int vi = v->slot_index(slot.name);
      if (vi < 0)
        missing.push_back(s.service_name + ".slot " + slot.name);
      else
        slot.description = v->slots[static_cast<size_t>(vi)].description;
    }
  }
  if (!missing.empty()) {
    std::string msg = "schema variant misses names:";
    for (const std::string& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  Corpus out;
  out.schemas = std::move(swapped);
  out.dialogues = corpus.dialogues;
  out.unreachable = corpus.unreachable;
  return out;
}

}  // namespace splat
