"""Pinned prompt templates.

Every template here is frozen and mirrored bit-exact in docs/prompts.md;
tests enforce the two copies stay in sync. Substitution uses literal
``{field}`` markers with str.replace because several templates contain
JSON braces.
"""

READER_PROMPT_TEMPLATE = """\
System Role: Knowledge extraction and question generation system.

Task Description: You will receive:
1. Original passage text
2. Extracted entities and relationships from the passage

Your task is to generate atomic knowledge facts and corresponding QA pairs.

Output Format:
A single JSON object only (nothing else) enclosed in a ```json ... ``` code block with exactly two keys:
- "atomic_facts": an array of atomic knowledge facts (each fact should be independent, complete, and self-contained)
- "qa": an array of objects {"question": "...", "answer": "..."}

Rules for Atomic Facts:
1. Each fact should be an independent, complete statement that can stand alone.
2. Cover both explicit and implicit relationships mentioned in the text.
3. Include background knowledge and context that help understand the entities.
4. Each fact should be concise but informative (preferably one sentence).
5. Do not duplicate facts or add information not present in the passage.

Rules for QA Generation:
1. Each question must be short (<= 12 words) and start with a question word (Who, What, When, Where, Which, How, How many).
2. Use explicit entity names from the entities list; avoid pronouns or vague references.
3. Each answer must be an exact verbatim substring from the original passage.
4. Ensure coverage of all important entities and relationships.
5. Avoid duplicate questions or answers.

Example:

[Original Text]:
Lilli's Marriage (German: Lillis Ehe) is a 1919 German silent film directed by Jaap Speyer. It is a sequel to the film "Lilli", and premiered at the Marmorhaus in Berlin. The film's art direction was by Hans Dreier.

[Entity List]:
Lilli's Marriage (WORK_OF_ART), Lillis Ehe (WORK_OF_ART), Jaap Speyer (PERSON), Lilli (WORK_OF_ART), Marmorhaus in Berlin (FAC), Hans Dreier (PERSON), 1919 (DATE)

[Output JSON]:
```json
{
  "atomic_facts": [
    "Lilli's Marriage is a 1919 German silent film",
    "Lilli's Marriage is also known as Lillis Ehe in German",
    "Jaap Speyer directed Lilli's Marriage",
    "Lilli's Marriage is a sequel to the film Lilli",
    "Lilli's Marriage premiered at the Marmorhaus in Berlin",
    "Hans Dreier was responsible for the art direction of Lilli's Marriage",
    "Lilli's Marriage was released in 1919"
  ],
  "qa": [
    {"question": "What is Lilli's Marriage?", "answer": "a 1919 German silent film"},
    {"question": "Who directed Lilli's Marriage?", "answer": "directed by Jaap Speyer"},
    {"question": "Which film is Lilli's Marriage a sequel to?", "answer": "It is a sequel to the film \\"Lilli\\""},
    {"question": "Where did Lilli's Marriage premiere?", "answer": "premiered at the Marmorhaus in Berlin"},
    {"question": "Who was responsible for the art direction of Lilli's Marriage?", "answer": " Hans Dreier"}
  ]
}
```

Now process the following passage:

[Original Text]:
{passage}

[Entity List]:
{entity_info}
"""

DECOMPOSE_PROMPT_TEMPLATE = """\
Decompose the question into the minimal sequence of atomic sub-questions needed to answer it.

Return a JSON array only, no other text: [{"id": 1, "question": "...", "depends_on": []}, ...]
Rules:
1. Ids start at 1 and increase.
2. "depends_on" lists the ids of sub-questions whose answers this one needs.
3. Where a sub-question needs the answer to sub-question i, write the placeholder {answer:i} in its text.
4. A question that needs no decomposition becomes a single sub-question with no dependencies.

Question: {question}
"""

SYNTHESIS_PROMPT_TEMPLATE = """\
You are answering a multi-hop question. The question was decomposed into sub-questions, each resolved against a knowledge base of atomic question-answer facts. Use the resolved sub-questions, their intermediate answers, and the retrieved facts to answer.

Question: {question}

{evidence}
Answer the original question with a short, direct phrase only.
"""

SYNTHESIS_HOP_TEMPLATE = """\
Sub-question {i}: {sub_question}
Intermediate answer {i}: {answer}
Retrieved facts {i}:
{facts}
"""

VANILLA_PROMPT_TEMPLATE = """\
Answer the question using the retrieved facts below.

Question: {question}

Retrieved facts:
{facts}

Answer with a short, direct phrase only.
"""

JUDGE_PROMPT_TEMPLATE = """\
You are an experienced linguist who is responsible for evaluating the correctness of the generated responses.
You are provided with question, the generated responses and the corresponding ground truth answer.
Your task is to compare the generated responses with the ground truth responses and evaluate the correctness of the generated responses.
Response directly "yes" or "no".

Question: {question}
Prediction: {prediction}
Ground-truth Answer: {answer}
Your response:
"""


def fill(template: str, **fields: str) -> str:
    """Substitute ``{name}`` markers literally, leaving all other braces."""
    out = template
    for name, value in fields.items():
        marker = "{" + name + "}"
        if marker not in out:
            raise KeyError(f"template has no field {marker}")
        out = out.replace(marker, value)
    return out
