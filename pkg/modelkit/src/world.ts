/** Synthetic corpus of patterned factual passages.
 *
 * Passages follow fixed sentence patterns so a deterministic generator
 * can recover the facts; entity pools are shared between train and
 * held-out splits (novel combinations, known vocabulary). Output rows
 * use the engine's corpus JSONL schema {id, title, text}.
 */

import { Rng } from "./rng.js";

const FIRST_NAMES = [
  "Ava", "Marek", "Lena", "Tobias", "Ingrid", "Oskar", "Petra", "Viktor",
  "Clara", "Anton", "Freya", "Emil", "Sonia", "Ruben", "Alma", "Casimir",
];
const LAST_NAMES = [
  "Duren", "Holt", "Vassberg", "Renn", "Maltez", "Quist", "Ferran", "Ostrov",
  "Lindqvist", "Barros", "Kessler", "Vance", "Halloran", "Ostler", "Brandt", "Ziegler",
];
const WORK_NAMES = [
  "Silver Harbor", "Iron Meadow", "The Glass Orchard", "Winter Lanterns",
  "The Copper Road", "Night of Reeds", "Salt and Ashes", "The Last Ferry",
  "Paper Mountains", "A Quiet Engine", "The Ninth Bell", "Harbor of Cranes",
  "Golden Sluice", "The Hollow Crown", "River of Sparrows", "Violet Standard",
  "The Tin Garden", "Morning Semaphore", "The Pale Climber", "Driftwood Sonata",
];
const LANDMARKS = [
  "the Veldt Tower", "the Auric Gate", "the Miro Bridge", "the Sable Obelisk",
  "the Lantern Spire", "the Corvin Arch", "the Helder Dome", "the Nyx Column",
  "the Farrow Lighthouse", "the Quill Monument", "the Brass Pavilion", "the Ashen Keep",
];
const COMPANIES = [
  "Northgate Films", "Bluewater Studios", "Calder Works", "the Merrow Company",
  "Stellar Foundry", "Harbrook Press", "the Vantine Group", "Coppervale Mills",
  "Graymarch Labs", "the Orvic Society", "Pinefold Atelier", "the Ryle Institute",
];
const CITIES = [
  "Altengard", "Pellmore", "Vastau", "Kirrinholm", "Ostermere", "Duskvale",
  "Bremlow", "Sarnwick", "Tallcrest", "Moorgate", "Elverum", "Quarrytown",
];
const COUNTRIES = [
  "Veldonia", "Kestrovia", "Marateum", "Ollandia", "Tyrennia", "Baskavia",
  "Lorvenne", "Ardessa",
];
const VENUES = [
  "Marmorhaus", "Opaline Hall", "Rexium", "Calder Theatre", "Gildenhouse",
  "Lyceum Grand", "Pantheon West", "Arcadia Palace",
];

export interface Passage {
  id: string;
  title: string;
  text: string;
}

export interface Fact {
  kind: "directed" | "released" | "premiered" | "situated" | "height" | "born" | "founded";
  subject: string;
  sentence: string;
  values: Record<string, string>;
}

export interface WorldPassage extends Passage {
  facts: Fact[];
}

function person(rng: Rng): string {
  return `${rng.pick(FIRST_NAMES)} ${rng.pick(LAST_NAMES)}`;
}

export function makeWorld(seed: number, nPassages: number): WorldPassage[] {
  const rng = new Rng(seed);
  const passages: WorldPassage[] = [];
  for (let i = 0; i < nPassages; i++) {
    const theme = i % 4;
    const facts: Fact[] = [];
    const sentences: string[] = [];
    let title: string;
    if (theme === 0) {
      const work = rng.pick(WORK_NAMES);
      const director = person(rng);
      const year = String(1900 + rng.int(120));
      const venue = rng.pick(VENUES);
      const city = rng.pick(CITIES);
      title = work;
      sentences.push(`${work} is a ${year} film directed by ${director}.`);
      facts.push({
        kind: "directed", subject: work,
        sentence: sentences[0],
        values: { person: director },
      });
      facts.push({
        kind: "released", subject: work,
        sentence: sentences[0],
        values: { year },
      });
      sentences.push(`${work} premiered at the ${venue} in ${city}.`);
      facts.push({
        kind: "premiered", subject: work,
        sentence: sentences[1],
        values: { venue, city },
      });
    } else if (theme === 1) {
      const landmark = rng.pick(LANDMARKS);
      const city = rng.pick(CITIES);
      const country = rng.pick(COUNTRIES);
      const height = String(40 + rng.int(500));
      title = landmark;
      sentences.push(`${capitalize(landmark)} is situated in ${city}, ${country}.`);
      facts.push({
        kind: "situated", subject: landmark,
        sentence: sentences[0],
        values: { city, country },
      });
      sentences.push(`${capitalize(landmark)} stands ${height} meters tall.`);
      facts.push({
        kind: "height", subject: landmark,
        sentence: sentences[1],
        values: { height },
      });
    } else if (theme === 2) {
      const who = person(rng);
      const city = rng.pick(CITIES);
      const work = rng.pick(WORK_NAMES);
      title = who;
      sentences.push(`${who} was born in ${city}.`);
      facts.push({ kind: "born", subject: who, sentence: sentences[0], values: { city } });
      sentences.push(`${who} directed ${work}.`);
      facts.push({
        kind: "directed", subject: work,
        sentence: sentences[1],
        values: { person: who },
      });
    } else {
      const company = rng.pick(COMPANIES);
      const founder = person(rng);
      const year = String(1850 + rng.int(170));
      title = company;
      sentences.push(`${capitalize(company)} was founded by ${founder} in ${year}.`);
      facts.push({
        kind: "founded", subject: company,
        sentence: sentences[0],
        values: { person: founder, year },
      });
    }
    passages.push({ id: `w${i}`, title, text: sentences.join(" "), facts });
  }
  return passages;
}

export function capitalize(text: string): string {
  return text.charAt(0).toUpperCase() + text.slice(1);
}

/** The worked extractor fixture lives in the same world. */
export const EIFFEL_PASSAGE: WorldPassage = {
  id: "eiffel",
  title: "the Eiffel Tower",
  text: "The Eiffel Tower is situated in Paris, France. The Eiffel Tower stands 324 meters tall.",
  facts: [
    {
      kind: "situated", subject: "the Eiffel Tower",
      sentence: "The Eiffel Tower is situated in Paris, France.",
      values: { city: "Paris", country: "France" },
    },
    {
      kind: "height", subject: "the Eiffel Tower",
      sentence: "The Eiffel Tower stands 324 meters tall.",
      values: { height: "324" },
    },
  ],
};
