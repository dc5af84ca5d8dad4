// DOM layer: renders a session snapshot and wires widget events back into
// the session. All texts (notice, instructions, rubric) come verbatim from
// the served payload; nothing is rephrased client-side.

import { Item } from "./api.js";
import { DIMENSIONS, Dimension, Session } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function renderRubricBlock(item: Item, dim: Dimension, session: Session): HTMLElement {
  const block = el("section", "rubric-block");
  const rubric = item.rubric[dim];
  block.appendChild(el("h3", "", rubric.question));
  const options = el("div", "score-options");
  for (let score = 1; score <= 5; score++) {
    const label = el("label", "score-option");
    const input = document.createElement("input");
    input.type = "radio";
    input.name = `score-${dim}`;
    input.value = String(score);
    input.addEventListener("change", () => {
      session.setScore(dim, score);
      refreshSubmit(session);
    });
    label.appendChild(input);
    label.appendChild(el("span", "score-value", String(score)));
    label.appendChild(el("span", "score-desc", rubric.scale[String(score)]));
    options.appendChild(label);
  }
  block.appendChild(options);
  return block;
}

function refreshSubmit(session: Session): void {
  const button = document.querySelector<HTMLButtonElement>("#submit-rating");
  if (button) button.disabled = !session.canSubmit();
}

function renderError(snapshotError: string, field: string | null): HTMLElement {
  const box = el("div", "error-box", field ? `${snapshotError} (field: ${field})` : snapshotError);
  box.setAttribute("role", "alert");
  return box;
}

export function render(root: HTMLElement, session: Session): void {
  const snap = session.snapshot();
  root.replaceChildren();

  if (snap.phase === "loading" || snap.phase === "idle") {
    root.appendChild(el("p", "status", "loading the next item..."));
    return;
  }
  if (snap.phase === "done") {
    const done = el("div", "completion");
    done.appendChild(el("h2", "", "All items rated"));
    done.appendChild(el("p", "", `Thank you, ${snap.rater}. The queue is empty.`));
    root.appendChild(done);
    return;
  }
  if (snap.phase === "error" || !snap.item) {
    root.appendChild(renderError(snap.error || "something went wrong", snap.errorField));
    const retry = el("button", "", "retry");
    retry.addEventListener("click", () => {
      void session.loadNext().then(() => render(root, session));
    });
    root.appendChild(retry);
    return;
  }

  const item = snap.item;
  const header = el("header");
  header.appendChild(el("h2", "", `Item ${item.item_id} (tier ${item.tier})`));
  header.appendChild(el("p", "notice", item.notice));
  header.appendChild(el("p", "instructions", item.instructions));
  root.appendChild(header);

  const players = el("div", "players");
  (["audio 1", "audio 2"] as const).forEach((label, index) => {
    const wrap = el("div", "player");
    wrap.appendChild(el("h4", "", label));
    const audio = document.createElement("audio");
    audio.controls = true;
    audio.src = index === 0 ? item.audio1_url : item.audio2_url;
    wrap.appendChild(audio);
    players.appendChild(wrap);
  });
  root.appendChild(players);

  const explanation = el("blockquote", "explanation", item.explanation);
  root.appendChild(explanation);

  if (snap.error) root.appendChild(renderError(snap.error, snap.errorField));

  for (const dim of DIMENSIONS) {
    root.appendChild(renderRubricBlock(item, dim, session));
  }

  const submit = el("button", "", "submit rating");
  submit.id = "submit-rating";
  submit.disabled = !session.canSubmit();
  submit.addEventListener("click", () => {
    void session.submitRating().then(() => render(root, session));
  });
  root.appendChild(submit);

  // verification mode: free-form corrections forwarded as edits
  const verify = el("details", "verify");
  verify.appendChild(el("summary", "", "verification mode"));
  const removed = document.createElement("textarea");
  removed.placeholder = "spans to remove, one per line";
  const added = document.createElement("textarea");
  added.placeholder = "text to add";
  const sendEdit = el("button", "", "submit edit");
  sendEdit.addEventListener("click", () => {
    session.setEditDraft(
      removed.value.split("\n").map((s) => s.trim()).filter(Boolean),
      added.value,
    );
    void session.submitEdit().then(() => render(root, session));
  });
  verify.appendChild(removed);
  verify.appendChild(added);
  verify.appendChild(sendEdit);
  root.appendChild(verify);
}
