#pragma once

#include <map>
#include <string>
#include <vector>

namespace splat {

struct IntentDef {
  std::string name;
  std::string description;
};

struct SlotDef {
  std::string name;
  std::string description;
  bool is_categorical = false;
  std::vector<std::string> possible_values;  // categorical only
};

struct ServiceSchema {
  std::string service_name;
  std::vector<IntentDef> intents;
  std::vector<SlotDef> slots;
  bool seen = true;  // drives the seen/unseen evaluation split

  int intent_index(const std::string& name) const;
  int slot_index(const std::string& name) const;
  const SlotDef& slot(int i) const { return slots[static_cast<size_t>(i)]; }
  void validate() const;
};

enum class Speaker { User, System };

struct DialogueState {
  std::string active_intent = "NONE";
  std::map<std::string, std::string> slot_values;

  bool operator==(const DialogueState&) const = default;
};

struct DialogueTurn {
  Speaker speaker = Speaker::User;
  std::string text;
  // Gold cumulative state; present on user turns.
  DialogueState state;
};

struct Dialogue {
  std::string dialogue_id;
  std::string service;
  std::vector<DialogueTurn> turns;

  int user_turn_count() const;
  void validate() const;
};

// JSON file formats mirroring the SGD layout (one object per service; a list
// of dialogue objects).
std::vector<ServiceSchema> parse_schemas_json(const std::string& text, const std::string& origin);
std::vector<Dialogue> parse_dialogues_json(const std::string& text, const std::string& origin);
std::string schemas_to_json(const std::vector<ServiceSchema>& schemas);
std::string dialogues_to_json(const std::vector<Dialogue>& dialogues);

std::vector<ServiceSchema> load_schemas(const std::string& path);
std::vector<Dialogue> load_dialogues(const std::string& path);

}  // namespace splat
