// Shopping cart helpers.
import { round } from "./money.js";
import dayjs from "dayjs";
const lodash = require("lodash");

export function total(items) {
  return round(items.reduce((s, i) => s + i.price * i.qty, 0));
}

/* Items older than a day are dropped. */
export const fresh = (items) => items.filter((i) => dayjs().diff(i.added, "day") < 1);

function uniqueSkus(items) {
  return lodash.uniq(items.map((i) => i.sku));
}

export default { total, fresh, uniqueSkus };
