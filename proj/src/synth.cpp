#include "splat/synth.hpp"

#include <stdexcept>

#include "splat/joint_input.hpp"
#include "splat/rng.hpp"

namespace splat {

namespace {

struct SlotArchetype {
  const char* name;
  const char* description;
  const char* cue;
  bool categorical;
  std::vector<const char*> values;  // pool for extractive, enumeration for categorical
};

const std::vector<SlotArchetype>& slot_archetypes() {
  static const std::vector<SlotArchetype> a = {
      {"to_city", "city where the trip ends", "to", false,
       {"long beach", "new york", "san jose", "palo alto", "santa fe", "el paso", "cedar falls",
        "ann arbor"}},
      {"from_city", "city where the trip starts", "from", false,
       {"baton rouge", "las vegas", "fort worth", "des moines", "salt lake", "san diego"}},
      {"travel_date", "day on which the trip happens", "on", false,
       {"next friday", "early march", "this weekend", "late april", "second monday",
        "first sunday"}},
      {"pickup_time", "time of the pickup", "at", false,
       {"seven thirty", "half past nine", "quarter to six", "noon", "eight sharp"}},
      {"venue_name", "name of the venue", "called", false,
       {"grand plaza", "blue lagoon", "golden dragon", "silver birch", "red rooster"}},
      {"dish_name", "food item being ordered", "having", false,
       {"spicy noodles", "garlic bread", "mushroom soup", "lemon cake", "herb salad"}},
      {"seat_class", "cabin tier of the seat", "seated", true, {"economy", "business", "first"}},
      {"has_bags", "whether bags get checked", "bags", true, {"yes", "no"}},
      {"party_size", "how many people attend", "party of", true, {"two", "four", "six"}},
      {"room_style", "kind of room requested", "style", true, {"suite", "standard", "loft"}},
      {"payment_kind", "how the user pays", "paying by", true, {"cash", "card"}},
  };
  return a;
}

const std::vector<const char*>& intent_verbs() {
  static const std::vector<const char*> v = {"book", "find", "cancel", "update"};
  return v;
}

const std::vector<const char*>& domain_nouns() {
  static const std::vector<const char*> v = {"trip", "table", "room", "ride", "meal"};
  return v;
}

std::string pick(Rng& rng, const std::vector<const char*>& pool) {
  return pool[static_cast<size_t>(rng.next_below(pool.size()))];
}

}  // namespace

SynthOutput gen_synth(uint64_t seed, int n_services, int n_dialogues) {
  if (n_services < 1 || n_dialogues < 1)
    throw std::runtime_error("gen_synth: counts must be >= 1");
  SynthOutput out;
  Rng rng(Rng::mix(seed, fnv1a("gen_synth")));

  for (int s = 0; s < n_services; ++s) {
    ServiceSchema schema;
    const std::string noun = domain_nouns()[static_cast<size_t>(s) % domain_nouns().size()];
    schema.service_name = noun + "s_" + std::to_string(s);
    schema.seen = rng.next_double() >= 0.25;

    const int n_intents = rng.next_int(2, 4);
    std::vector<int> verb_order(intent_verbs().size());
    for (size_t i = 0; i < verb_order.size(); ++i) verb_order[i] = static_cast<int>(i);
    rng.shuffle(verb_order);
    for (int i = 0; i < n_intents; ++i) {
      const std::string verb = intent_verbs()[static_cast<size_t>(verb_order[static_cast<size_t>(i)])];
      schema.intents.push_back(
          {verb + "_" + noun, verb + " a " + noun + " for the user"});
    }

    const int n_slots = rng.next_int(3, 6);
    std::vector<int> slot_order(slot_archetypes().size());
    for (size_t i = 0; i < slot_order.size(); ++i) slot_order[i] = static_cast<int>(i);
    rng.shuffle(slot_order);
    for (int i = 0; i < n_slots; ++i) {
      const SlotArchetype& a = slot_archetypes()[static_cast<size_t>(slot_order[static_cast<size_t>(i)])];
      SlotDef def;
      def.name = a.name;
      def.description = a.description;
      def.is_categorical = a.categorical;
      if (a.categorical)
        for (const char* v : a.values) def.possible_values.emplace_back(v);
      schema.slots.push_back(std::move(def));
    }
    schema.validate();
    out.schemas.push_back(std::move(schema));
  }

  const std::vector<const char*> openers = {"i want to", "please", "i need to", "could you"};
  const std::vector<const char*> continuers = {"also make it", "and set it", "one more thing ,"};
  const std::vector<const char*> system_lines = {"sure , anything else ?", "okay , noted .",
                                                 "got it , what next ?"};
  const std::vector<const char*> greetings = {"hello there", "hi , are you around ?",
                                              "good morning"};

  for (int d = 0; d < n_dialogues; ++d) {
    const ServiceSchema& schema =
        out.schemas[static_cast<size_t>(rng.next_below(static_cast<uint64_t>(n_services)))];
    Dialogue dlg;
    dlg.dialogue_id = "synth_" + std::to_string(d);
    dlg.service = schema.service_name;
    const IntentDef& intent =
        schema.intents[static_cast<size_t>(rng.next_below(schema.intents.size()))];
    const std::string noun_phrase = intent.name.substr(0, intent.name.find('_')) + " a " +
                                    intent.name.substr(intent.name.find('_') + 1);

    DialogueState state;  // cumulative
    std::vector<int> unset(static_cast<size_t>(schema.slots.size()));
    for (size_t i = 0; i < unset.size(); ++i) unset[i] = static_cast<int>(i);
    rng.shuffle(unset);

    // optional small-talk opening with no active intent
    if (rng.next_double() < 0.2) {
      DialogueTurn hello{Speaker::User, pick(rng, greetings), {}};
      hello.state.active_intent = kNoneIntentName;
      dlg.turns.push_back(std::move(hello));
      dlg.turns.push_back({Speaker::System, pick(rng, system_lines), {}});
    }

    const int want_turns = rng.next_int(1, 3);
    for (int t = 0; t < want_turns && !unset.empty(); ++t) {
      std::string text = t == 0 ? pick(rng, openers) + " " + noun_phrase
                                : pick(rng, continuers);
      const int introduce = std::min<int>(rng.next_int(1, 2), static_cast<int>(unset.size()));
      for (int k = 0; k < introduce; ++k) {
        const SlotDef& slot = schema.slots[static_cast<size_t>(unset.back())];
        unset.pop_back();
        const SlotArchetype* arch = nullptr;
        for (const SlotArchetype& a : slot_archetypes())
          if (slot.name == a.name) arch = &a;
        if (rng.next_double() < 0.1) {
          text += " , any " + slot.name.substr(slot.name.find('_') + 1) + " works";
          state.slot_values[slot.name] = "dontcare";
        } else {
          const std::string value =
              slot.is_categorical
                  ? slot.possible_values[static_cast<size_t>(rng.next_below(slot.possible_values.size()))]
                  : pick(rng, arch->values);
          text += " " + std::string(arch->cue) + " " + value;
          state.slot_values[slot.name] = value;
        }
      }
      DialogueTurn turn{Speaker::User, text, {}};
      turn.state.active_intent = intent.name;
      turn.state.slot_values = state.slot_values;
      dlg.turns.push_back(std::move(turn));
      if (t + 1 < want_turns && !unset.empty())
        dlg.turns.push_back({Speaker::System, pick(rng, system_lines), {}});
    }
    dlg.validate();
    out.dialogues.push_back(std::move(dlg));
  }

  // Plain-text corpus with planted recurring spans, sharing the value pools.
  const int n_docs = std::max(16, n_dialogues / 2);
  const std::vector<const char*> fillers = {"friendly", "quiet", "busy", "famous", "cozy"};
  for (int i = 0; i < n_docs; ++i) {
    const SlotArchetype& venue = slot_archetypes()[4];
    const SlotArchetype& city = slot_archetypes()[0];
    const std::string phrase = pick(rng, venue.values);
    const std::string place = pick(rng, city.values);
    std::string doc = "the " + phrase + " is a " + pick(rng, fillers) + " spot in " + place + " . ";
    doc += "many guests enjoy the " + phrase + " every season . ";
    if (rng.next_double() < 0.5) doc += "we went back to the " + phrase + " with friends . ";
    doc += "locals call " + place + " a " + pick(rng, fillers) + " place to live .";
    out.rss_docs.push_back(std::move(doc));
  }
  return out;
}

}  // namespace splat
