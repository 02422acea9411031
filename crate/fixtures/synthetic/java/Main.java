package shop;

import java.io.IOException;
import java.nio.file.Files;
import java.nio.file.Path;

public class Main {
    /*
     * Reads one item per line and prints the totals.
     */
    public static void main(String[] args) throws IOException {
        Inventory inv = new Inventory();
        for (String line : Files.readAllLines(Path.of(args[0]))) {
            inv.add(line.trim(), 1);
        }
        System.out.println(inv.count("apple"));
    }
}
