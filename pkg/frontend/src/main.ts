// Bootstrap: ask for the rater id once, then run the session loop.

import { Client } from "./api.js";
import { Session } from "./state.js";
import { render } from "./ui.js";

function start(root: HTMLElement, rater: string): void {
  const session = new Session(new Client(""), rater);
  void session.loadNext().then(() => render(root, session));
}

function main(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const form = document.createElement("form");
  const label = document.createElement("label");
  label.textContent = "rater id: ";
  const input = document.createElement("input");
  input.name = "rater";
  input.required = true;
  const go = document.createElement("button");
  go.type = "submit";
  go.textContent = "start";
  label.appendChild(input);
  form.appendChild(label);
  form.appendChild(go);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const rater = input.value.trim();
    if (rater) start(root, rater);
  });
  root.replaceChildren(form);
}

main();
