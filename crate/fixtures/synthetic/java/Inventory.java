package shop;

import java.util.HashMap;
import java.util.Map;
import java.util.Optional;

/** Tracks stock levels per item. */
public class Inventory {
    private final Map<String, Integer> stock = new HashMap<>();

    public Inventory() {
    }

    // adds units, creating the item if needed
    public void add(String item, int units) {
        stock.merge(item, units, Integer::sum);
    }

    public Optional<Integer> count(String item) {
        return Optional.ofNullable(stock.get(item));
    }

    public boolean remove(String item, int units) {
        Integer have = stock.get(item);
        if (have == null || have < units) {
            return false;
        }
        stock.put(item, have - units);
        return true;
    }
}
