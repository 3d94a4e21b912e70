"""Builds sample_qa_pool.jsonl: short factual entries whose distractors are
the other entries' gold documents that mention none of the answer aliases."""

import json
import pathlib
import re

ENTRIES = [
    ("who got the first nobel prize in physics", ["Wilhelm Conrad Röntgen", "Röntgen"],
     "List of Nobel laureates in Physics",
     "The first Nobel Prize in Physics was awarded in 1901 to Wilhelm Conrad Röntgen, of Germany, "
     "who received 150,782 SEK, in recognition of the extraordinary services he rendered by the discovery "
     "of the remarkable rays subsequently named after him."),
    ("what is the capital city of australia", ["Canberra"], "Canberra",
     "Canberra is the capital city of Australia. It was selected as the site of the federal capital in 1908 "
     "as a compromise between Sydney and Melbourne, the two largest cities."),
    ("who wrote the novel pride and prejudice", ["Jane Austen", "Austen"], "Pride and Prejudice",
     "Pride and Prejudice is an 1813 novel of manners written by Jane Austen. It follows the character "
     "development of Elizabeth Bennet, the protagonist of the book."),
    ("what is the chemical symbol for gold", ["Au"], "Gold",
     "Gold is a chemical element with the symbol Au, from the Latin word aurum, and atomic number 79. "
     "In its pure form it is a bright, slightly orange-yellow, dense, soft, malleable metal."),
    ("how many bones are in the adult human body", ["206"], "Human skeleton",
     "The human skeleton of an adult consists of around 206 bones. At birth the skeleton has more bones, "
     "several of which fuse together during development."),
    ("what is the longest river in south america", ["Amazon River", "Amazon"], "Amazon River",
     "The Amazon River in South America is the largest river by discharge volume of water in the world, "
     "and it is the longest river on the continent."),
    ("who painted the mona lisa", ["Leonardo da Vinci", "da Vinci"], "Mona Lisa",
     "The Mona Lisa is a half-length portrait painting by the Italian artist Leonardo da Vinci. It has been "
     "described as the best known and most visited work of art in the world."),
    ("what planet is known as the red planet", ["Mars"], "Mars",
     "Mars is the fourth planet from the Sun. It is often called the Red Planet because iron oxide on its "
     "surface gives it a reddish appearance."),
    ("in which year did the berlin wall fall", ["1989"], "Berlin Wall",
     "The Berlin Wall was a guarded concrete barrier that divided Berlin. The border crossings were opened "
     "on 9 November 1989, and demolition continued over the following years."),
    ("what is the largest ocean on earth", ["Pacific Ocean", "Pacific"], "Pacific Ocean",
     "The Pacific Ocean is the largest and deepest of the world's oceanic divisions. It extends from the "
     "Arctic in the north to the Southern Ocean in the south."),
    ("who developed the theory of general relativity", ["Albert Einstein", "Einstein"], "General relativity",
     "General relativity is the geometric theory of gravitation published by Albert Einstein in 1915. It is "
     "the current description of gravitation in modern physics."),
    ("what is the smallest prime number", ["2", "two"], "Prime number",
     "A prime number is a natural number greater than 1 that is not a product of two smaller natural numbers. "
     "The smallest prime is 2, which is also the only even prime."),
    ("which element has the atomic number 1", ["Hydrogen"], "Hydrogen",
     "Hydrogen is the chemical element with the symbol H and atomic number 1. It is the lightest element and "
     "the most abundant chemical substance in the universe."),
    ("who was the first person to walk on the moon", ["Neil Armstrong", "Armstrong"], "Apollo 11",
     "Apollo 11 was the spaceflight that first landed humans on the Moon. Commander Neil Armstrong stepped "
     "onto the lunar surface on July 21, 1969 UTC."),
    ("what is the currency of japan", ["Yen", "Japanese yen"], "Japanese yen",
     "The yen is the official currency of Japan. It is the third most traded currency in the foreign exchange "
     "market, after the United States dollar and the euro."),
    ("what is the tallest mountain in the world", ["Mount Everest", "Everest"], "Mount Everest",
     "Mount Everest is Earth's highest mountain above sea level, located in the Mahalangur Himal sub-range "
     "of the Himalayas on the border between Nepal and China."),
    ("who composed the four seasons", ["Antonio Vivaldi", "Vivaldi"], "The Four Seasons (Vivaldi)",
     "The Four Seasons is a group of four violin concertos by the Italian composer Antonio Vivaldi, each of "
     "which gives musical expression to a season of the year."),
    ("what gas do plants absorb from the atmosphere for photosynthesis", ["Carbon dioxide", "CO2"],
     "Photosynthesis",
     "Photosynthesis is the process by which plants convert light energy into chemical energy. Plants take "
     "in carbon dioxide and water and release oxygen as a by-product."),
    ("what is the largest desert in the world", ["Antarctic Desert", "Antarctica"], "Desert",
     "By the definition of low precipitation, the largest desert in the world is the Antarctic Desert, "
     "followed by the Arctic Desert and the Sahara."),
    ("who invented the telephone", ["Alexander Graham Bell", "Bell"], "Invention of the telephone",
     "Alexander Graham Bell was awarded the first United States patent for the telephone in 1876, although "
     "several inventors worked on voice transmission at the time."),
    ("what is the hardest natural substance", ["Diamond"], "Diamond",
     "Diamond is a solid form of carbon with its atoms arranged in a crystal structure. It has the highest "
     "hardness and thermal conductivity of any natural material."),
    ("in which city is the colosseum located", ["Rome"], "Colosseum",
     "The Colosseum is an elliptical amphitheatre in the centre of the city of Rome, Italy. Construction "
     "began under the emperor Vespasian in AD 72."),
    ("what is the speed of light in vacuum in kilometres per second", ["299,792", "299792"],
     "Speed of light",
     "The speed of light in vacuum is exactly 299,792,458 metres per second, which is about 299,792 "
     "kilometres per second. It is a universal physical constant."),
    ("who wrote the play romeo and juliet", ["William Shakespeare", "Shakespeare"], "Romeo and Juliet",
     "Romeo and Juliet is a tragedy written by William Shakespeare early in his career about two young "
     "lovers whose deaths reconcile their feuding families."),
    ("what is the largest planet in the solar system", ["Jupiter"], "Jupiter",
     "Jupiter is the fifth planet from the Sun and the largest in the Solar System. It is a gas giant with a "
     "mass more than two and a half times that of all the other planets combined."),
    ("which country hosted the 2016 summer olympics", ["Brazil"], "2016 Summer Olympics",
     "The 2016 Summer Olympics were held in Rio de Janeiro, Brazil, from 5 to 21 August 2016. They were the "
     "first Olympic Games held in South America."),
    ("what is the boiling point of water at sea level in celsius", ["100"], "Boiling point",
     "At standard atmospheric pressure, which corresponds to sea level, pure water boils at 100 degrees "
     "Celsius, or 212 degrees Fahrenheit."),
    ("who discovered penicillin", ["Alexander Fleming", "Fleming"], "Penicillin",
     "Penicillin was discovered in 1928 by the Scottish scientist Alexander Fleming, who noticed that a mould "
     "had killed bacteria growing on a culture plate."),
    ("what is the official language of brazil", ["Portuguese"], "Languages of Brazil",
     "Portuguese is the official and national language of Brazil, and it is spoken by nearly the entire "
     "population of the country."),
    ("how many continents are there", ["seven", "7"], "Continent",
     "By the most common convention there are seven continents: Asia, Africa, North America, South America, "
     "Antarctica, Europe and Australia."),
    ("who was the first president of the united states", ["George Washington", "Washington"],
     "President of the United States",
     "George Washington was the first president of the United States, serving from 1789 to 1797 after "
     "leading the Continental Army in the Revolutionary War."),
    ("what is the powerhouse of the cell", ["Mitochondrion", "Mitochondria"], "Mitochondrion",
     "A mitochondrion is an organelle found in the cells of most eukaryotes. Mitochondria generate most of "
     "the cell's supply of adenosine triphosphate, used as a source of chemical energy."),
    ("which organ pumps blood through the human body", ["Heart"], "Heart",
     "The heart is a muscular organ that pumps blood through the blood vessels of the circulatory system, "
     "supplying oxygen and nutrients to the tissues."),
    ("what is the capital of canada", ["Ottawa"], "Ottawa",
     "Ottawa is the capital city of Canada. It is located on the south bank of the Ottawa River in the "
     "eastern portion of southern Ontario."),
    ("who wrote the origin of species", ["Charles Darwin", "Darwin"], "On the Origin of Species",
     "On the Origin of Species, published on 24 November 1859, is a work of scientific literature by "
     "Charles Darwin that is considered the foundation of evolutionary biology."),
    ("what is the freezing point of water in fahrenheit", ["32"], "Melting point",
     "The melting point of ice at standard pressure is 0 degrees Celsius, which corresponds to "
     "32 degrees Fahrenheit, the temperature at which water freezes."),
    ("what is the most spoken native language in the world", ["Mandarin Chinese", "Mandarin"],
     "List of languages by number of native speakers",
     "Mandarin Chinese has the largest number of native speakers of any language, with close to a billion "
     "people speaking it as a first language."),
    ("which instrument has 88 keys", ["Piano"], "Piano",
     "The piano is a keyboard instrument. A modern standard piano has 88 keys, 52 white and 36 black, "
     "covering just over seven octaves."),
    ("what is the largest mammal", ["Blue whale"], "Blue whale",
     "The blue whale is a marine mammal belonging to the baleen whales. Reaching lengths of up to 30 metres, "
     "it is the largest animal known ever to have existed."),
    ("who is the author of the odyssey", ["Homer"], "Odyssey",
     "The Odyssey is one of two major ancient Greek epic poems attributed to Homer. It follows the hero "
     "Odysseus on his ten-year journey home after the Trojan War."),
    ("what is the square root of 144", ["12", "twelve"], "Square root",
     "A square root of a number x is a number y such that y squared equals x. For example, the square root "
     "of 144 is 12, since 12 times 12 equals 144."),
    ("in which country are the pyramids of giza", ["Egypt"], "Giza pyramid complex",
     "The Giza pyramid complex, on the Giza Plateau in Egypt, is home to the Great Pyramid, the Pyramid of "
     "Khafre and the Pyramid of Menkaure."),
    ("what is the main ingredient in guacamole", ["Avocado"], "Guacamole",
     "Guacamole is an avocado-based dip, spread or salad first developed in Mexico. Modern recipes usually "
     "add lime juice, onion, tomato and coriander."),
    ("who proposed the heliocentric model of the solar system", ["Nicolaus Copernicus", "Copernicus"],
     "Copernican heliocentrism",
     "Copernican heliocentrism is the astronomical model developed by Nicolaus Copernicus and published in "
     "1543, which placed the Sun near the centre of the universe."),
    ("what is the largest country by area", ["Russia"], "Russia",
     "Russia is a country spanning Eastern Europe and Northern Asia. It is the largest country in the world "
     "by area, covering over 17 million square kilometres."),
    ("what language has the most words in the oxford english dictionary", ["English"],
     "Oxford English Dictionary",
     "The Oxford English Dictionary is the principal historical dictionary of the English language, "
     "published by Oxford University Press since 1884."),
    ("who sculpted the statue of david", ["Michelangelo"], "David (Michelangelo)",
     "David is a masterpiece of Italian Renaissance sculpture created in marble between 1501 and 1504 by "
     "Michelangelo. It stands 5.17 metres tall."),
    ("what is the chemical formula of table salt", ["NaCl"], "Sodium chloride",
     "Sodium chloride, commonly known as table salt, is an ionic compound with the chemical formula NaCl, "
     "representing a one to one ratio of sodium and chloride ions."),
    ("which blood type is the universal donor", ["O negative", "O-negative"], "Blood type",
     "Type O negative red blood cells can be given to patients of any ABO and Rh blood type, which is why "
     "O negative is known as the universal donor for red cells."),
    ("what is the name of the longest bone in the human body", ["Femur", "thigh bone"], "Femur",
     "The femur, or thigh bone, is the only bone in the thigh. It is both the longest and the strongest bone "
     "in the human body."),
]


def norm(s):
    tokens = [re.sub(r"^\W+|\W+$", "", t) for t in s.lower().split()]
    return " ".join(t for t in tokens if t)


def main():
    out = pathlib.Path(__file__).with_name("sample_qa_pool.jsonl")
    lines = []
    for i, (q, answers, title, body) in enumerate(ENTRIES):
        assert any(norm(a) in norm(body) for a in answers), title
        distractors = [
            {"title": t, "body": b}
            for j, (_, _, t, b) in enumerate(ENTRIES)
            if j != i and not any(norm(a) in norm(b) or norm(a) in norm(t) for a in answers)
        ]
        assert len(distractors) >= 29, (title, len(distractors))
        lines.append(json.dumps(
            {"question": q, "answers": answers, "gold": {"title": title, "body": body},
             "distractors": distractors},
            ensure_ascii=False))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{len(lines)} entries -> {out}")


if __name__ == "__main__":
    main()
