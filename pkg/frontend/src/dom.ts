/** Tiny DOM helpers; the UI is plain elements and event listeners. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function option(value: string, label?: string): HTMLOptionElement {
  const node = el("option", { value });
  node.textContent = label ?? value;
  return node;
}

/** Render an error message into a target container (replacing content). */
export function showError(target: HTMLElement, message: string): void {
  clear(target);
  target.append(el("div", { class: "error-banner" }, [message]));
}
