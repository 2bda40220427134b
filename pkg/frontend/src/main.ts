/** Browser bootstrap: wire the gateway client to the DOM. */

import { GatewayClient } from "./client.js";
import { ACTIONS, type Action } from "./fsm.js";
import { renderApp } from "./render.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const client = new GatewayClient(window.location.origin, {
  onChange: (state) => {
    root.innerHTML = renderApp(state);
  },
});

root.addEventListener("click", (ev) => {
  const target = (ev.target as HTMLElement).closest("[data-action]");
  if (!target || target.hasAttribute("disabled")) return;
  const action = target.getAttribute("data-action") as Action;
  if ((ACTIONS as readonly string[]).includes(action)) {
    void client.command(action);
  }
});

client.connect();
